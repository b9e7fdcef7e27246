import pytest

from forwarding.design import design
from forwarding.scenario import integral_action_system, reference_system
from forwarding.sylvester import solve_sylvester

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def ref_system():
    return reference_system()


@pytest.fixture(scope="session")
def ref_solution(ref_system):
    return solve_sylvester(ref_system)


@pytest.fixture(scope="session")
def ref_cert(ref_system, ref_solution):
    return design(ref_system, ref_solution)


@pytest.fixture(scope="session")
def small_system():
    return reference_system(n_interior=40)


@pytest.fixture(scope="session")
def small_solution(small_system):
    return solve_sylvester(small_system)


@pytest.fixture(scope="session")
def small_cert(small_system, small_solution):
    return design(small_system, small_solution)


@pytest.fixture(scope="session")
def integral_system():
    return integral_action_system()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
