import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forwarding import kernels
from forwarding import _kernels_py

needs_cython = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")


def _bands(rng, n, complex_=False):
    lo, up = rng.normal(size=n - 1), rng.normal(size=n - 1)
    d = 4.0 + np.abs(rng.normal(size=n))
    if complex_:
        d = d + 1j * rng.normal(size=n)
    return lo, d, up


def _dense(lo, d, up):
    return np.diag(d) + np.diag(lo, -1) + np.diag(up, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(1, 4), st.booleans(), st.integers(0, 10_000))
def test_solve_against_dense(n, k, complex_, seed):
    rng = np.random.default_rng(seed)
    lo, d, up = _bands(rng, n, complex_)
    rhs = rng.normal(size=(n, k))
    x = kernels.tridiag_solve(lo, d, up, rhs, backend="python")
    assert np.allclose(_dense(lo, d, up) @ x, rhs, atol=1e-10)


@needs_cython
@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.booleans(), st.integers(0, 10_000))
def test_backend_parity(n, complex_, seed):
    rng = np.random.default_rng(seed)
    lo, d, up = _bands(rng, n, complex_)
    rhs = rng.normal(size=n)
    a = kernels.tridiag_solve(lo, d, up, rhs, backend="python")
    b = kernels.tridiag_solve(lo, d, up, rhs, backend="cython")
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
    ma = kernels.tridiag_matvec(lo, d, up, rhs, backend="python")
    mb = kernels.tridiag_matvec(lo, d, up, rhs, backend="cython")
    assert np.allclose(ma, mb, rtol=1e-13, atol=1e-14)
    assert np.allclose(ma, _dense(lo, d, up) @ rhs)


def _march_case(seed, n=30, r=2):
    rng = np.random.default_rng(seed)
    h = 1 / (n + 1)
    off = np.full(n - 1, 1 / h**2)
    d = np.full(n, -2 / h**2)
    U = rng.normal(size=(n, r))
    V = rng.normal(size=(r, n)) * 0.1
    S = np.array([[0.0, 1.0], [-1.0, 0.0]])[:r, :r]
    w0 = rng.normal(size=n + r)
    return off, d, off, U, V, S, w0


def test_theta_march_matches_dense_step():
    lo, d, up, U, V, S, w0 = _march_case(0)
    n, r = d.size, S.shape[0]
    F = np.block([[_dense(lo, d, up), U], [V, S]])
    dt, theta = 0.01, 0.5
    lhs = np.eye(n + r) - theta * dt * F
    rhs = np.eye(n + r) + (1 - theta) * dt * F
    w = w0.copy()
    for _ in range(5):
        w = np.linalg.solve(lhs, rhs @ w)
    out = kernels.theta_march(lo, d, up, U, V, S, w0, dt, theta, 5, backend="python")
    assert out.shape == (6, n + r)
    assert np.allclose(out[-1], w, rtol=1e-10, atol=1e-12)


@needs_cython
@pytest.mark.parametrize("theta", [0.5, 1.0])
def test_theta_march_parity(theta):
    args = _march_case(1)
    a = kernels.theta_march(*args, 0.02, theta, 50, backend="python")
    b = kernels.theta_march(*args, 0.02, theta, 50, backend="cython")
    assert np.allclose(a, b, rtol=1e-11, atol=1e-13)


def test_read_only_inputs_accepted():
    lo, d, up, U, V, S, w0 = _march_case(2)
    for arr in (lo, d, U, V, S, w0):
        arr.setflags(write=False)
    out = kernels.theta_march(lo, d, up, U, V, S, w0, 0.01, 0.5, 3)
    assert np.all(np.isfinite(out))


def test_zero_pivot_raises():
    with pytest.raises(ZeroDivisionError):
        kernels.tridiag_solve(np.ones(2), np.zeros(3), np.ones(2), np.ones(3))


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_var_forces_fallback():
    env = dict(os.environ, FORWARDING_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from forwarding import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.get_backend("python") is _kernels_py
