"""Backend selection for the tridiagonal kernels.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy/scipy twin in ``_kernels_py``. Setting ``FORWARDING_PURE_PYTHON=1``
forces the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("FORWARDING_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ('cython', 'python' or None)."""
    if name is None:
        return _compiled if _compiled is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def _common_dtype(*arrays):
    return np.complex128 if any(np.iscomplexobj(a) for a in arrays) else np.float64


def tridiag_matvec(lower, diag, upper, x, backend=None):
    dt = _common_dtype(lower, diag, upper, x)
    args = [np.ascontiguousarray(v, dtype=dt) for v in (lower, diag, upper, x)]
    return np.asarray(get_backend(backend).tridiag_matvec(*args))


def tridiag_solve(lower, diag, upper, rhs, backend=None):
    """Solve ``tridiag(lower, diag, upper) x = rhs`` for 1-D or 2-D ``rhs``.

    Raises ZeroDivisionError on a zero pivot.
    """
    dt = _common_dtype(lower, diag, upper, rhs)
    bands = [np.ascontiguousarray(v, dtype=dt) for v in (lower, diag, upper)]
    rhs = np.asarray(rhs)
    vector = rhs.ndim == 1
    b = np.ascontiguousarray(rhs.reshape(rhs.shape[0], -1), dtype=dt)
    x = np.asarray(get_backend(backend).tridiag_solve(*bands, b))
    return x[:, 0] if vector else x


def theta_march(lower, diag, upper, U, V, S, w0, dt, theta, nsteps, backend=None):
    """Integrate w' = [[A, U], [V, S]] w with the theta scheme.

    Returns the (nsteps+1, N+r) array of states including ``w0``.
    """
    f64 = lambda v: np.ascontiguousarray(v, dtype=np.float64)  # noqa: E731
    lower, diag, upper = f64(lower), f64(diag), f64(upper)
    U, V, S, w0 = f64(U), f64(V), f64(S), f64(w0)
    a = theta * dt
    Z = f64(tridiag_solve(-a * lower, 1.0 - a * diag, -a * upper, U, backend=backend))
    K = np.eye(S.shape[0]) - a * S - a * a * (V @ Z)
    Kinv = f64(np.linalg.inv(K))
    out = get_backend(backend).theta_march(
        lower, diag, upper, U, V, S, Z, Kinv, w0, float(dt), float(theta), int(nsteps)
    )
    return np.asarray(out)
