import json

import numpy as np
import pytest

from forwarding.cascade import (
    CascadeSystem,
    ExoSystem,
    check_detectability,
    check_nonresonance,
    check_ode_assumption,
    check_spectra_disjoint,
    kalman_matrix,
    measure_dissipation,
    reports_to_json,
    run_assumption_checks,
)
from forwarding.errors import AssumptionViolation, DimensionError
from forwarding.operators import (
    DiscreteFunction,
    build_control_injector,
    build_grid,
    build_point_observation,
    discretize_heat,
    heat_spectrum,
    identity,
)
from forwarding.scenario import ROTATION, build_heat_cascade


def test_reference_assumptions_pass(ref_system):
    reports = run_assumption_checks(ref_system)
    assert [r.name for r in reports] == [
        "plant_dissipative", "ode_controllable_marginal", "spectra_disjoint", "non_resonance"]
    assert all(r.passed for r in reports)
    payload = json.loads(reports_to_json(reports))
    assert payload["assumptions"][0]["pass"] is True


def test_measured_dissipation_matches_lowest_mode(ref_system):
    # P = I: mu = -2 * largest eigenvalue of A
    expected = -2.0 * heat_spectrum(ref_system.grid)[-1]
    assert ref_system.mu == pytest.approx(expected, rel=1e-12)
    assert ref_system.mu == pytest.approx(2 * np.pi**2, rel=1e-4)


def test_dissipation_with_weighted_P():
    g = build_grid(30)
    A = discretize_heat(g)
    P = identity(30, g.h)
    assert measure_dissipation(A, P) == pytest.approx(measure_dissipation(A))


def test_zero_gamma_flags_controllability():
    sys = build_heat_cascade(30, 0.4, ROTATION, [[0.0], [0.0]])
    rep = check_ode_assumption(sys.exo)
    assert not rep.passed
    assert rep.witness["kalman_rank"] == 0


def test_unstable_exosystem_flagged():
    rep = check_ode_assumption(ExoSystem([[0.5]], [[1.0]]))
    assert not rep.passed
    assert not rep.witness["marginally_stable"]


def test_kalman_matrix_rotation():
    K = kalman_matrix(ROTATION, [[1.0], [0.0]])
    assert np.allclose(K, [[1.0, 0.0], [0.0, -1.0]])


def test_q_must_be_positive_definite():
    with pytest.raises(AssumptionViolation):
        ExoSystem(ROTATION, [[1.0], [0.0]], Q=[[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(AssumptionViolation):
        ExoSystem(ROTATION, [[1.0], [0.0]], Q=[[1.0, 0.5], [0.0, 1.0]])


def test_spectral_overlap_detected():
    g = build_grid(20)
    lam = heat_spectrum(g)[-1]
    rep = check_spectra_disjoint(discretize_heat(g), [[lam]])
    assert not rep.passed
    assert rep.witness["min_distance"] < 1e-8


def test_dimension_mismatch_rejected():
    g = build_grid(10)
    B = build_control_injector(DiscreteFunction(np.ones(10), g))
    C = build_point_observation(0.3, g)
    exo = ExoSystem(ROTATION, np.ones((2, 2)))
    with pytest.raises(DimensionError):
        CascadeSystem(discretize_heat(g), B, C, exo)
    with pytest.raises(DimensionError):
        CascadeSystem(discretize_heat(g), C, B, ExoSystem(ROTATION, [[1.0], [0.0]]))


def test_nonresonance_needs_enough_inputs():
    g = build_grid(10)
    B = build_control_injector(DiscreteFunction(np.ones(10), g))
    C = build_point_observation(0.3, g)
    C2 = type(C)(np.vstack([C.entries, build_point_observation(0.6, g).entries]),
                 C.source, C.target, h=g.h)
    sys = CascadeSystem(discretize_heat(g), B, C2, ExoSystem(ROTATION, np.eye(2)))
    with pytest.raises(DimensionError):
        check_nonresonance(sys)
    names = {r.name: r for r in run_assumption_checks(sys)}
    assert not names["non_resonance"].required


def test_nonresonance_fails_when_input_is_invisible():
    # with b = 0 the input column vanishes and the block loses rank
    g = build_grid(12)
    B = build_control_injector(DiscreteFunction(np.zeros(12), g))
    C = build_point_observation(0.3, g)
    sys = CascadeSystem(discretize_heat(g), B, C, ExoSystem([[0.0]], [[1.0]]))
    assert not check_nonresonance(sys).passed


def test_detectability_pbh():
    assert check_detectability(ROTATION, [[1.0, 0.0]]).passed
    assert not check_detectability(ROTATION, [[0.0, 0.0]]).passed
    # stable modes need not be observed
    assert check_detectability([[-1.0]], [[0.0]]).passed
    rep = check_detectability(np.diag([0.0, -2.0]), [[0.0, 1.0]])
    assert not rep.passed
    assert rep.witness["failing_eigenvalue"] == pytest.approx(0.0)
