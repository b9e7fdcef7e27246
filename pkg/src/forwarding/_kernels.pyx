# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tridiagonal kernels.

Mirrors ``_kernels_py`` function for function; ``forwarding.kernels`` picks
whichever is importable.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef fused scalar:
    double
    double complex


def tridiag_matvec(const scalar[::1] lower, const scalar[::1] diag, const scalar[::1] upper,
                   const scalar[::1] x):
    cdef Py_ssize_t n = diag.shape[0], i
    if x.shape[0] != n:
        raise ValueError("length mismatch")
    if scalar is double:
        out = np.empty(n, dtype=np.float64)
    else:
        out = np.empty(n, dtype=np.complex128)
    cdef scalar[::1] y = out
    if n == 1:
        y[0] = diag[0] * x[0]
        return out
    y[0] = diag[0] * x[0] + upper[0] * x[1]
    for i in range(1, n - 1):
        y[i] = lower[i - 1] * x[i - 1] + diag[i] * x[i] + upper[i] * x[i + 1]
    y[n - 1] = lower[n - 2] * x[n - 2] + diag[n - 1] * x[n - 1]
    return out


def tridiag_solve(const scalar[::1] lower, const scalar[::1] diag, const scalar[::1] upper,
                  const scalar[:, ::1] rhs):
    """Thomas elimination for every column of ``rhs`` (no pivoting)."""
    cdef Py_ssize_t n = diag.shape[0], k = rhs.shape[1], i, j
    cdef scalar denom
    if rhs.shape[0] != n:
        raise ValueError("length mismatch")
    if scalar is double:
        cp = np.empty(n, dtype=np.float64)
        out = np.array(rhs, dtype=np.float64, copy=True)
    else:
        cp = np.empty(n, dtype=np.complex128)
        out = np.array(rhs, dtype=np.complex128, copy=True)
    cdef scalar[::1] c = cp
    cdef scalar[:, ::1] d = out

    denom = diag[0]
    if denom == 0:
        raise ZeroDivisionError("zero pivot in row 0")
    c[0] = upper[0] / denom if n > 1 else 0
    for j in range(k):
        d[0, j] = d[0, j] / denom
    for i in range(1, n):
        denom = diag[i] - lower[i - 1] * c[i - 1]
        if denom == 0:
            raise ZeroDivisionError("zero pivot in row %d" % i)
        if i < n - 1:
            c[i] = upper[i] / denom
        for j in range(k):
            d[i, j] = (d[i, j] - lower[i - 1] * d[i - 1, j]) / denom
    for i in range(n - 2, -1, -1):
        for j in range(k):
            d[i, j] = d[i, j] - c[i] * d[i + 1, j]
    return out


def theta_march(const double[::1] lower, const double[::1] diag, const double[::1] upper,
                const double[:, ::1] U, const double[:, ::1] V, const double[:, ::1] S,
                const double[:, ::1] Z, const double[:, ::1] Kinv, const double[::1] w0,
                double dt, double theta, Py_ssize_t nsteps):
    """Advance the bordered-tridiagonal closed loop with the theta scheme.

    The generator is [[A, U], [V, S]] with A = tridiag(lower, diag, upper).
    ``Z`` must hold (I - theta*dt*A)^{-1} U and ``Kinv`` the inverse of the
    r x r Schur complement I - theta*dt*S - (theta*dt)^2 V Z.
    """
    cdef Py_ssize_t n = diag.shape[0], r = S.shape[0], step, i, j
    cdef double a = theta * dt, bexp = (1.0 - theta) * dt, denom, acc

    states_arr = np.empty((nsteps + 1, n + r), dtype=np.float64)
    cdef double[:, ::1] states = states_arr
    cp_arr = np.empty(n, dtype=np.float64)
    inv_arr = np.empty(n, dtype=np.float64)
    y_arr = np.empty(n, dtype=np.float64)
    r2_arr = np.empty(r, dtype=np.float64)
    cdef double[::1] c = cp_arr, inv = inv_arr, y = y_arr, rhs2 = r2_arr

    # LU factors of T = I - a*A; tl/tu are the off-diagonals of T
    denom = 1.0 - a * diag[0]
    inv[0] = 1.0 / denom
    c[0] = (-a * upper[0]) * inv[0] if n > 1 else 0.0
    for i in range(1, n):
        denom = (1.0 - a * diag[i]) - (-a * lower[i - 1]) * c[i - 1]
        if denom == 0.0:
            raise ZeroDivisionError("singular implicit step matrix")
        inv[i] = 1.0 / denom
        if i < n - 1:
            c[i] = (-a * upper[i]) * inv[i]

    for i in range(n + r):
        states[0, i] = w0[i]

    for step in range(nsteps):
        # explicit part: rhs1 = phi + bexp*(A phi + U z)
        for i in range(n):
            acc = diag[i] * states[step, i]
            if i > 0:
                acc += lower[i - 1] * states[step, i - 1]
            if i < n - 1:
                acc += upper[i] * states[step, i + 1]
            for j in range(r):
                acc += U[i, j] * states[step, n + j]
            y[i] = states[step, i] + bexp * acc
        for j in range(r):
            acc = 0.0
            for i in range(n):
                acc += V[j, i] * states[step, i]
            for i in range(r):
                acc += S[j, i] * states[step, n + i]
            rhs2[j] = states[step, n + j] + bexp * acc

        # y <- T^{-1} rhs1
        y[0] = y[0] * inv[0]
        for i in range(1, n):
            y[i] = (y[i] - (-a * lower[i - 1]) * y[i - 1]) * inv[i]
        for i in range(n - 2, -1, -1):
            y[i] = y[i] - c[i] * y[i + 1]

        # z+ = Kinv (rhs2 + a V y)
        for j in range(r):
            acc = 0.0
            for i in range(n):
                acc += V[j, i] * y[i]
            rhs2[j] = rhs2[j] + a * acc
        for j in range(r):
            acc = 0.0
            for i in range(r):
                acc += Kinv[j, i] * rhs2[i]
            states[step + 1, n + j] = acc

        # phi+ = y + a Z z+
        for i in range(n):
            acc = y[i]
            for j in range(r):
                acc += a * Z[i, j] * states[step + 1, n + j]
            states[step + 1, i] = acc
    return states_arr
