import csv

import numpy as np
import pytest

from forwarding.errors import DimensionError
from forwarding.scenario import reference_initial_state
from forwarding.simulate import (
    assemble_closed_loop,
    estimate_decay_rate,
    integrate,
    lyapunov_trace,
    resolvent_probe,
    sign_diagnostic,
    spectral_abscissa,
    sweep_k,
    with_traces,
    write_full_state_csv,
    write_sweep_csv,
    write_trajectory_csv,
)


def test_closed_loop_blocks(small_system, small_cert):
    s, c = small_system, small_cert
    cl = assemble_closed_loop(s, c.H, c.k, "plus")
    n = s.n
    assert cl.F.shape == (n + 2, n + 2)
    assert np.allclose(cl.U, c.k * s.B.entries @ c.H)
    assert np.allclose(cl.V, s.Gamma @ s.C.entries)
    assert np.allclose(cl.S, s.S)
    minus = assemble_closed_loop(s, c.H, c.k, "minus")
    assert np.allclose(minus.U, -cl.U)


def test_closed_loop_validation(small_system, small_cert):
    with pytest.raises(ValueError):
        assemble_closed_loop(small_system, small_cert.H, 1.0, "sideways")
    with pytest.raises(ValueError):
        assemble_closed_loop(small_system, small_cert.H, -1.0)
    with pytest.raises(DimensionError):
        assemble_closed_loop(small_system, np.ones((1, 3)), 1.0)


def test_zero_gain_is_marginal(small_system, small_cert):
    a = spectral_abscissa(assemble_closed_loop(small_system, small_cert.H, 0.0))
    assert abs(a) < 1e-8


def test_schemes_agree(small_system, small_cert):
    cl = assemble_closed_loop(small_system, small_cert.H, small_cert.k)
    w0 = reference_initial_state(small_system)
    exact = integrate(cl, w0, 1.0, 0.01, scheme="exact-exponential")
    cn = integrate(cl, w0, 1.0, 0.01, scheme="theta-implicit")
    assert exact.scheme == "exact-exponential" and cn.scheme == "theta-implicit"
    err = np.abs(exact.states[-1] - cn.states[-1]).max()
    assert err < 1e-3
    fine = integrate(cl, w0, 1.0, 0.005, scheme="theta-implicit")
    # second-order in time: halving dt cuts the error about fourfold
    assert np.abs(exact.states[-1] - fine.states[-1]).max() < err / 3


def test_auto_scheme_threshold(small_system, small_cert):
    cl = assemble_closed_loop(small_system, small_cert.H, small_cert.k)
    traj = integrate(cl, reference_initial_state(small_system), 0.1, 0.01)
    assert traj.scheme == "exact-exponential"
    assert traj.times.size == 11


def test_zero_initial_state_stays_zero(small_system, small_cert):
    cl = assemble_closed_loop(small_system, small_cert.H, small_cert.k)
    traj = integrate(cl, np.zeros(small_system.n + 2), 1.0, 0.1, scheme="theta-implicit")
    assert not np.any(traj.states)


def test_integrate_validation(small_system, small_cert):
    cl = assemble_closed_loop(small_system, small_cert.H, small_cert.k)
    w0 = reference_initial_state(small_system)
    with pytest.raises(ValueError):
        integrate(cl, w0, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate(cl, w0, 1.0, 0.1, theta=0.2)
    with pytest.raises(DimensionError):
        integrate(cl, w0[:-1], 1.0, 0.1)
    with pytest.raises(ValueError):
        integrate(cl, w0, 1.0, 0.1, scheme="rk4")


def test_lyapunov_trace_reference(small_system, small_solution, small_cert):
    cl = assemble_closed_loop(small_system, small_cert.H, small_cert.k)
    traj = integrate(cl, reference_initial_state(small_system), 5.0, 0.01)
    v, w, rep = lyapunov_trace(traj, small_cert, small_solution, small_system)
    assert rep["consistent"]
    assert rep["v_monotone"] and rep["w_strictly_decreasing"]
    assert rep["v_derivative_ok"] and rep["w_derivative_ok"]
    assert np.all(w >= v)


def test_lyapunov_trace_inconsistent_gain(small_system, small_solution, small_cert):
    cl = assemble_closed_loop(small_system, small_cert.H, 0.0)
    traj = integrate(cl, reference_initial_state(small_system), 0.5, 0.01)
    _, _, rep = lyapunov_trace(traj, small_cert, small_solution, small_system)
    assert not rep["consistent"]
    assert rep["w_derivative_ok"] is None


def test_decay_rate_of_exponential():
    t = np.linspace(0, 10, 1001)
    assert estimate_decay_rate(3.0 * np.exp(-0.7 * t), t) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        estimate_decay_rate(np.zeros(10), dt=0.1)


def test_decay_rate_matches_abscissa(small_system, small_solution, small_cert):
    cl = assemble_closed_loop(small_system, small_cert.H, small_cert.k)
    traj = integrate(cl, reference_initial_state(small_system), 40.0, 0.05)
    _, w, _ = lyapunov_trace(traj, small_cert, small_solution, small_system)
    rate = estimate_decay_rate(w, traj.times)
    assert rate == pytest.approx(-2 * spectral_abscissa(cl), rel=2e-2)


def test_sweep_includes_reference_gains(small_system, small_cert):
    rows = sweep_k(small_system, small_cert.H, [1.0, 2.0], signs=("plus", "minus"),
                   k_star=small_cert.k_star)
    ks = sorted({r.k for r in rows})
    assert ks[-1] == pytest.approx(small_cert.k_star)
    assert any(np.isclose(k, small_cert.k_star / 2) for k in ks)
    assert len(rows) == 2 * len(ks)
    assert [r.k for r in rows] == sorted(r.k for r in rows)


def test_sign_diagnostic(small_system, small_cert):
    diag = sign_diagnostic(small_system, small_cert.H, small_cert.k)
    assert diag["stabilizing"] == ["plus"]
    assert diag["matches_lyapunov_sign"]


def test_resolvent_probe(small_system, small_cert):
    cl = assemble_closed_loop(small_system, small_cert.H, small_cert.k)
    rep = resolvent_probe(cl, 2.0)
    assert rep["pass"] and rep["above_s_norm"]
    assert rep["s_resolvent_norm"] <= rep["s_resolvent_bound"] + 1e-12
    assert not resolvent_probe(cl, 0.5)["above_s_norm"]


def test_csv_writers(tmp_path, small_system, small_solution, small_cert):
    cl = assemble_closed_loop(small_system, small_cert.H, small_cert.k)
    traj = integrate(cl, reference_initial_state(small_system), 0.1, 0.05)
    with pytest.raises(ValueError):
        write_trajectory_csv(tmp_path / "t.csv", traj, small_system.h)
    v, w, _ = lyapunov_trace(traj, small_cert, small_solution, small_system)
    traj = with_traces(traj, v, w)
    write_trajectory_csv(tmp_path / "t.csv", traj, small_system.h)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["t", "z_1", "z_2", "V", "W", "phi_norm"]
    assert len(rows) == 4
    write_full_state_csv(tmp_path / "p.csv", traj)
    assert len(next(csv.reader(open(tmp_path / "p.csv")))) == small_system.n + 1
    write_sweep_csv(tmp_path / "s.csv", sweep_k(small_system, small_cert.H, [1.0]))
    k, sign, absc, stable = (tmp_path / "s.csv").read_text().splitlines()[1].split(",")
    assert (float(k), sign, stable) == (1.0, "plus", "true") and float(absc) < 0
