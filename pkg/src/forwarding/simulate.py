"""Closed-loop generator, time integration and Lyapunov traces."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm, lu_factor, lu_solve

from . import kernels
from .cascade import CascadeSystem
from .design import DesignCertificate, evaluate_U, evaluate_V
from .errors import DimensionError, NumericError, StepSizeError
from .sylvester import SylvesterSolution

SIGNS = {"plus": 1.0, "minus": -1.0}
EXACT_MAX_DIM = 500
STABLE_TOL = 1e-9


@dataclass(frozen=True)
class ClosedLoop:
    """Generator F = [[A, +-k B H Q], [Gamma C, S]] acting on w = (phi, z)."""

    F: np.ndarray
    k: float
    sign: str
    n: int
    r: int
    bands: tuple | None = field(default=None, repr=False)

    @property
    def U(self):
        return self.F[: self.n, self.n :]

    @property
    def V(self):
        return self.F[self.n :, : self.n]

    @property
    def S(self):
        return self.F[self.n :, self.n :]


def assemble_closed_loop(sys: CascadeSystem, H, k: float, sign: str = "plus") -> ClosedLoop:
    if sign not in SIGNS:
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    if k < 0:
        raise ValueError("k must be non-negative")
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape != (sys.m, sys.r):
        raise DimensionError(f"H must be {sys.m}x{sys.r}, got {H.shape}")
    n, r = sys.n, sys.r
    F = np.zeros((n + r, n + r))
    F[:n, :n] = sys.A.entries
    F[:n, n:] = SIGNS[sign] * k * (sys.B.entries @ H @ sys.Q)
    F[n:, :n] = sys.Gamma @ sys.C.entries
    F[n:, n:] = sys.S
    F.setflags(write=False)
    return ClosedLoop(F, float(k), sign, n, r, sys.A.bands)


def spectral_abscissa(F) -> float:
    F = F.F if isinstance(F, ClosedLoop) else np.asarray(F)
    try:
        eig = np.linalg.eigvals(F)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    return float(np.max(eig.real))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # rows are w = (phi, z)
    n: int
    r: int
    scheme: str
    dt: float
    k: float = 0.0
    sign: str = "plus"
    v_trace: np.ndarray | None = None
    w_trace: np.ndarray | None = None

    @property
    def phi(self):
        return self.states[:, : self.n]

    @property
    def z(self):
        return self.states[:, self.n :]


def integrate(
    cl: ClosedLoop,
    w0,
    T: float,
    dt: float,
    scheme: str = "auto",
    theta: float = 0.5,
    backend: str | None = None,
) -> Trajectory:
    """Integrate w' = F w from ``w0`` on [0, T] with step ``dt``.

    ``scheme`` is 'exact-exponential' (one precomputed step matrix
    exp(F dt)), 'theta-implicit' (Crank-Nicolson for theta = 1/2) or
    'auto', which picks the exponential up to N + r = 500.
    """
    if dt <= 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    if not 0.5 <= theta <= 1.0:
        raise ValueError("theta must lie in [1/2, 1]")
    w0 = np.asarray(w0, dtype=float)
    dim = cl.n + cl.r
    if w0.shape != (dim,):
        raise DimensionError(f"initial state must have length {dim}")
    nsteps = int(round(T / dt))
    times = np.arange(nsteps + 1) * dt
    if scheme == "auto":
        scheme = "exact-exponential" if dim <= EXACT_MAX_DIM else "theta-implicit"

    if scheme == "exact-exponential":
        step = expm(cl.F * dt)
        if not np.all(np.isfinite(step)):
            raise NumericError("matrix exponential overflowed")
        states = np.empty((nsteps + 1, dim))
        states[0] = w0
        for i in range(nsteps):
            states[i + 1] = step @ states[i]
    elif scheme == "theta-implicit":
        states = _theta_steps(cl, w0, dt, theta, nsteps, backend)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not np.all(np.isfinite(states)):
        raise NumericError("trajectory contains non-finite values")
    return Trajectory(times, states, cl.n, cl.r, scheme, float(dt), cl.k, cl.sign)


def _theta_steps(cl, w0, dt, theta, nsteps, backend):
    try:
        if cl.bands is not None:
            lo, d, up = cl.bands
            return kernels.theta_march(lo, d, up, cl.U, cl.V, cl.S, w0, dt, theta, nsteps,
                                       backend=backend)
        dim = cl.n + cl.r
        lhs = lu_factor(np.eye(dim) - theta * dt * cl.F, check_finite=True)
        rhs_mat = np.eye(dim) + (1.0 - theta) * dt * cl.F
        states = np.empty((nsteps + 1, dim))
        states[0] = w0
        for i in range(nsteps):
            states[i + 1] = lu_solve(lhs, rhs_mat @ states[i])
        return states
    except (ZeroDivisionError, np.linalg.LinAlgError) as exc:
        raise StepSizeError(f"implicit step matrix is singular for dt = {dt}: {exc}") from exc


def lyapunov_trace(
    traj: Trajectory,
    cert: DesignCertificate,
    sol: SylvesterSolution,
    sys: CascadeSystem,
    tol_rel: float = 1e-6,
    step_rtol: float = 1e-9,
):
    """V and W along ``traj`` plus finite-difference checks of their decay.

    Returns ``(v_trace, w_trace, report)``. The derivative inequalities are
    only meaningful when the trajectory was run with the certificate's gain
    and the plus sign; otherwise ``report['consistent']`` is False and the
    inequality verdicts are None.
    """
    phi, z = traj.phi, traj.z
    v = np.atleast_1d(evaluate_V(phi, z, cert.p, sol, sys.Q, sys.P))
    u = np.atleast_1d(evaluate_U(phi, z, sol, cert.Pi))
    w = v + cert.c * u

    report = {
        "consistent": bool(np.isclose(traj.k, cert.k, rtol=1e-12, atol=0) and traj.sign == "plus"),
        "v_monotone": bool(np.all(v[1:] <= v[:-1] * (1.0 + step_rtol) + 1e-300)),
        "w_monotone": bool(np.all(w[1:] <= w[:-1] * (1.0 + step_rtol) + 1e-300)),
        "w_strictly_decreasing": bool(np.all(w[1:] - w[:-1] < step_rtol * w[:-1])),
        "v_derivative_ok": None,
        "w_derivative_ok": None,
    }
    if len(w) >= 3 and report["consistent"]:
        tol = tol_rel * w[0]
        dt = traj.dt
        dv = (v[2:] - v[:-2]) / (2 * dt)
        dw = (w[2:] - w[:-2]) / (2 * dt)
        inner = slice(1, -1)
        phi_sq = sys.h * np.sum(phi[inner] ** 2, axis=1)
        hqz = z[inner] @ (cert.H @ sys.Q).T
        hqz_sq = np.sum(hqz**2, axis=1)
        e = z[inner] - phi[inner] @ sol.M.T
        e_sq = np.sum(e**2, axis=1)
        v_excess = dv - (-cert.a * phi_sq - cert.b * hqz_sq)
        w_excess = dw - (-cert.eps_W * (phi_sq + cert.c * e_sq))
        report.update(
            tolerance=float(tol),
            eps_W=cert.eps_W,
            v_derivative_ok=bool(np.all(v_excess <= tol)),
            w_derivative_ok=bool(np.all(w_excess <= tol)),
            v_max_excess=float(v_excess.max()),
            w_max_excess=float(w_excess.max()),
        )
    return v, w, report


def with_traces(traj: Trajectory, v, w) -> Trajectory:
    return replace(traj, v_trace=np.asarray(v), w_trace=np.asarray(w))


def estimate_decay_rate(trace, times=None, dt: float | None = None) -> float:
    """Rate alpha with trace(t) ~ trace(0) exp(-alpha t), from a least-squares
    fit of log(trace) over the second half of the horizon."""
    trace = np.asarray(trace, dtype=float)
    if times is None:
        times = np.arange(trace.size) * (1.0 if dt is None else dt)
    times = np.asarray(times, dtype=float)
    positive = trace > np.finfo(float).tiny
    if not positive[0]:
        raise ValueError("trace must start positive")
    last = trace.size if positive.all() else int(np.argmin(positive))
    trace, times = trace[:last], times[:last]
    start = trace.size // 2
    if trace.size - start < 2:
        raise ValueError("not enough positive samples to fit a rate")
    slope = np.polyfit(times[start:], np.log(trace[start:]), 1)[0]
    return float(-slope)


@dataclass(frozen=True)
class SweepRow:
    k: float
    sign: str
    abscissa: float
    stable: bool


def sweep_k(sys: CascadeSystem, H, k_values, signs=("plus",), k_star: float | None = None,
            workers: int | None = None) -> list[SweepRow]:
    """Spectral abscissa over a grid of gains and feedback signs.

    When ``k_star`` is given, rows for k_star/2 and k_star are always included.
    """
    ks = [float(k) for k in k_values]
    if any(k < 0 for k in ks):
        raise ValueError("gains must be non-negative")
    if k_star is not None:
        for extra in (0.5 * k_star, k_star):
            if not any(np.isclose(extra, k, rtol=1e-12, atol=0) for k in ks):
                ks.append(float(extra))
        ks.sort()
    cells = [(k, s) for k in ks for s in signs]

    def run(cell):
        k, s = cell
        a = spectral_abscissa(assemble_closed_loop(sys, H, k, s))
        return SweepRow(k, s, a, a < -STABLE_TOL)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, cells))


def sign_diagnostic(sys: CascadeSystem, H, k: float) -> dict:
    """Which feedback sign stabilizes at gain ``k``."""
    rows = {s: spectral_abscissa(assemble_closed_loop(sys, H, k, s)) for s in SIGNS}
    stabilizing = [s for s, a in rows.items() if a < -STABLE_TOL]
    return {
        "k": float(k),
        "abscissa": rows,
        "stabilizing": stabilizing,
        "matches_lyapunov_sign": stabilizing == ["plus"],
    }


def resolvent_probe(cl: ClosedLoop, lam: float, cond_max: float = 1e12) -> dict:
    """Invertibility of lam I - F, with the bound 1/(lam - |S|) on the S block."""
    dim = cl.n + cl.r
    s_norm = float(np.linalg.norm(cl.S, 2))
    shifted = lam * np.eye(dim) - cl.F
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(shifted))
    if not np.isfinite(cond):
        cond = float("inf")
    report = {
        "lambda": float(lam),
        "s_norm": s_norm,
        "above_s_norm": bool(lam > s_norm),
        "condition_number": cond,
        "pass": bool(cond < cond_max),
    }
    if lam > s_norm:
        report["s_resolvent_norm"] = float(np.linalg.norm(np.linalg.inv(lam * np.eye(cl.r) - cl.S), 2))
        report["s_resolvent_bound"] = 1.0 / (lam - s_norm)
    return report


def _fmt(x) -> str:
    return repr(float(x))


def write_trajectory_csv(path, traj: Trajectory, h: float) -> None:
    """Columns t, z_1..z_r, V, W, phi_norm (traces must be attached)."""
    if traj.v_trace is None or traj.w_trace is None:
        raise ValueError("attach V/W traces before exporting")
    phi_norm = np.sqrt(h * np.sum(traj.phi**2, axis=1))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"z_{i + 1}" for i in range(traj.r)] + ["V", "W", "phi_norm"])
        for i, t in enumerate(traj.times):
            writer.writerow([_fmt(t)] + [_fmt(v) for v in traj.z[i]]
                            + [_fmt(traj.v_trace[i]), _fmt(traj.w_trace[i]), _fmt(phi_norm[i])])


def write_full_state_csv(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"phi_{i + 1}" for i in range(traj.n)])
        for t, row in zip(traj.times, traj.phi):
            writer.writerow([_fmt(t)] + [_fmt(v) for v in row])


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "sign", "abscissa", "stable"])
        for row in rows:
            writer.writerow([_fmt(row.k), row.sign, _fmt(row.abscissa), str(bool(row.stable)).lower()])
