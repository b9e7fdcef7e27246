import numpy as np
import pytest
import scipy.linalg

from forwarding.errors import ConditioningError, RepresentationError
from forwarding.operators import build_grid, heat_spectrum
from forwarding.scenario import ROTATION, ROTATION_GAMMA, build_heat_cascade, reference_system
from forwarding.sylvester import (
    analytic_heat_M,
    load_solution,
    m_operator_norm,
    riesz_rows,
    save_solution,
    solve_sylvester,
    sylvester_residual,
)


def test_reference_residual(ref_system, ref_solution):
    assert ref_solution.residual <= 1e-8
    GC = ref_system.Gamma @ ref_system.C.entries
    assert sylvester_residual(ref_system.S, ref_solution.M, ref_system.A.entries, GC) == \
        pytest.approx(ref_solution.residual)


def test_matches_dense_solver(small_system, small_solution):
    s = small_system
    # S M + M (-A) = -Gamma C
    M = scipy.linalg.solve_sylvester(s.S, -s.A.entries, -s.Gamma @ s.C.entries)
    assert np.allclose(small_solution.M, M, rtol=1e-9, atol=1e-14)


@pytest.mark.parametrize("sort", ["lhp", "rhp", "iuc", "ouc"])
def test_schur_ordering_invariance(small_system, small_solution, sort):
    other = solve_sylvester(small_system, schur_sort=sort)
    assert np.allclose(other.M, small_solution.M, rtol=1e-10, atol=1e-15)


def test_backends_agree(small_system):
    a = solve_sylvester(small_system, backend="python")
    b = solve_sylvester(small_system, backend="cython") if _has_cython() else a
    assert np.allclose(a.M, b.M, rtol=1e-12, atol=1e-16)


def _has_cython():
    from forwarding import kernels
    return kernels.BACKEND == "cython"


def test_zero_coupling_gives_zero_M():
    sys = build_heat_cascade(20, 0.4, ROTATION, [[0.0], [0.0]])
    sol = solve_sylvester(sys)
    assert not np.any(sol.M)
    assert sol.residual == 0.0
    assert m_operator_norm(sol) == 0.0


def test_resonant_shift_raises():
    g = build_grid(20)
    lam = heat_spectrum(g)[-1]
    sys = build_heat_cascade(20, 0.4, [[lam]], [[1.0]])
    with pytest.raises(ConditioningError) as info:
        solve_sylvester(sys)
    assert info.value.shift == pytest.approx(lam)


def green(x, ell):
    return np.where(x <= ell, -x * (1 - ell), -ell * (1 - x))


@pytest.mark.parametrize("n", [20, 200])
def test_integral_action_matches_green_function(n):
    # S = 0, Gamma = 1: M'' = delta_ell, so M is the Dirichlet Green function.
    # With ell on a node the three-point stencil reproduces it exactly.
    ell = 1.0 / 3.0 if n == 200 else 7.0 / 21.0
    sys = build_heat_cascade(n, ell, [[0.0]], [[1.0]])
    sol = solve_sylvester(sys)
    rows = riesz_rows(sol)[0].values
    assert np.allclose(rows, green(sol.grid.nodes, ell), atol=1e-10)


def test_analytic_boundary_and_jump():
    Mx = analytic_heat_M(ROTATION, ROTATION_GAMMA, 1.0 / 3.0)
    ends = Mx(np.array([0.0, 1.0]))
    assert np.allclose(ends, 0.0, atol=1e-12)
    eps = 1e-6
    left = (Mx(1 / 3) - Mx(1 / 3 - eps)) / eps
    right = (Mx(1 / 3 + eps) - Mx(1 / 3)) / eps
    assert np.allclose(right - left, ROTATION_GAMMA, atol=1e-4)


def test_analytic_integral_action_is_green():
    Mx = analytic_heat_M([[0.0]], [[1.0]], 0.3)
    x = np.linspace(0, 1, 41)
    assert np.allclose(Mx(x)[0], green(x, 0.3), atol=1e-12)


def test_analytic_representation_error():
    # S = -(pi)^2 makes the boundary block singular
    with pytest.raises(RepresentationError):
        analytic_heat_M([[-np.pi**2]], [[1.0]], 0.3)


def test_analytic_sample_close_to_numeric():
    sys = reference_system(100)
    Mx = analytic_heat_M(sys.S, sys.Gamma, 1 / 3)
    ana = Mx.sample(sys.grid, sys)
    num = solve_sylvester(sys)
    err = np.abs(ana.M - num.M).max() / np.abs(num.M).max()
    assert err < 1e-3
    assert ana.residual < 1e-2


def test_save_load_roundtrip(tmp_path, small_solution):
    save_solution(small_solution, tmp_path / "s.json", tmp_path / "s.csv")
    back = load_solution(tmp_path / "s.json")
    assert np.allclose(back.M, small_solution.M, rtol=1e-15, atol=0)
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "x,M_1,M_2"


def test_m_norm_is_weighted(small_solution):
    rows = riesz_rows(small_solution)
    # with r = 2 the norm is at least the norm of each Riesz row
    assert m_operator_norm(small_solution) >= max(r.norm() for r in rows) - 1e-14
