"""Pure-Python (numpy/scipy) versions of the compiled kernels.

Signatures and results match ``_kernels``; used when the extension is not
built or when ``FORWARDING_PURE_PYTHON=1`` is set.
"""
import numpy as np
from scipy.linalg import solve_banded


def _bands(lower, diag, upper):
    n = diag.shape[0]
    ab = np.zeros((3, n), dtype=np.result_type(lower, diag, upper))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return ab


def tridiag_matvec(lower, diag, upper, x):
    if x.shape[0] != diag.shape[0]:
        raise ValueError("length mismatch")
    y = diag * x
    y[:-1] += upper * x[1:]
    y[1:] += lower * x[:-1]
    return y


def tridiag_solve(lower, diag, upper, rhs):
    if rhs.shape[0] != diag.shape[0]:
        raise ValueError("length mismatch")
    try:
        return solve_banded((1, 1), _bands(lower, diag, upper), rhs)
    except np.linalg.LinAlgError as exc:
        raise ZeroDivisionError(str(exc)) from exc


def theta_march(lower, diag, upper, U, V, S, Z, Kinv, w0, dt, theta, nsteps):
    n = diag.shape[0]
    a = theta * dt
    bexp = (1.0 - theta) * dt
    ab = _bands(-a * lower, 1.0 - a * diag, -a * upper)
    states = np.empty((nsteps + 1, w0.shape[0]))
    states[0] = w0
    for step in range(nsteps):
        phi, z = states[step, :n], states[step, n:]
        rhs1 = phi + bexp * (tridiag_matvec(lower, diag, upper, phi) + U @ z)
        rhs2 = z + bexp * (V @ phi + S @ z)
        y = solve_banded((1, 1), ab, rhs1)
        z_next = Kinv @ (rhs2 + a * (V @ y))
        states[step + 1, n:] = z_next
        states[step + 1, :n] = y + a * (Z @ z_next)
    return states
