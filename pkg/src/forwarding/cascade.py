"""Cascade plant assembly and numerical checks of the standing assumptions."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import AssumptionViolation, DimensionError
from .operators import OperatorMatrix, Space, identity, operator_norm

RANK_RTOL = 1e-10


def numeric_rank(matrix, rtol=RANK_RTOL) -> int:
    sv = np.linalg.svd(np.atleast_2d(matrix), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def _json_value(v):
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.ndarray):
        return [_json_value(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    witness: dict = field(default_factory=dict)
    required: bool = True

    def __bool__(self):
        return bool(self.passed)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": bool(self.passed),
            "required": bool(self.required),
            "witness": _json_value(self.witness),
        }


@dataclass(frozen=True)
class ExoSystem:
    S: np.ndarray
    Gamma: np.ndarray
    Q: np.ndarray | None = None

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        r = S.shape[0]
        if S.shape != (r, r):
            raise DimensionError(f"S must be square, got {S.shape}")
        G = np.asarray(self.Gamma, dtype=float)
        if G.ndim == 1:
            G = G.reshape(r, -1)
        if G.shape[0] != r:
            raise DimensionError(f"Gamma must have {r} rows, got {G.shape}")
        Q = np.eye(r) if self.Q is None else np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape != (r, r):
            raise DimensionError(f"Q must be {r}x{r}, got {Q.shape}")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise AssumptionViolation("Q is not symmetric")
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise AssumptionViolation("Q is not positive definite")
        for name, arr in (("S", S), ("Gamma", G), ("Q", Q)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def r(self) -> int:
        return self.S.shape[0]

    @property
    def p(self) -> int:
        return self.Gamma.shape[1]


def measure_dissipation(A: OperatorMatrix, P: OperatorMatrix | None = None) -> float:
    """Largest mu with <PA phi, phi> + <P phi, A phi> <= -mu ||phi||^2.

    Both operators act on the weighted space with uniform weight, where the
    adjoint is the transpose, so ``mu = -lambda_max(PA + (PA)^T)``.
    """
    n = A.shape[0]
    if P is None:
        P_mat = None
    else:
        P_mat = P.entries
        if P_mat.shape != (n, n):
            raise DimensionError(f"P has shape {P_mat.shape}, A has {A.shape}")
        scale = max(1.0, np.abs(P_mat).max())
        if not np.allclose(P_mat, P_mat.T, rtol=0, atol=1e-12 * scale):
            raise AssumptionViolation("P is not symmetric")
        if np.linalg.eigvalsh(P_mat).min() <= 0:
            raise AssumptionViolation("P is not positive definite")
        if np.array_equal(P_mat, np.eye(n)):
            P_mat = None
    if P_mat is None and A.bands is not None:
        lo, d, up = A.bands
        top = eigh_tridiagonal(2 * d, lo + up, eigvals_only=True, select="i",
                               select_range=(n - 1, n - 1))
        return float(-top[0])
    PA = A.entries if P_mat is None else P_mat @ A.entries
    return float(-np.linalg.eigvalsh(PA + PA.T)[-1])


@dataclass(frozen=True)
class CascadeSystem:
    """Discretized cascade: phi' = A phi + B u, z' = S z + Gamma C phi."""

    A: OperatorMatrix
    B: OperatorMatrix
    C: OperatorMatrix
    exo: ExoSystem
    P: OperatorMatrix | None = None
    mu: float | None = None
    grid: object = field(default=None, compare=False)
    reference_mu: float | None = field(default=None, compare=False)

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError("A must be square")
        if (self.A.source, self.A.target) != (Space.FUNCTION, Space.FUNCTION):
            raise DimensionError("A must map the function space to itself")
        if self.B.shape[0] != n or (self.B.source, self.B.target) != (Space.EUCLIDEAN, Space.FUNCTION):
            raise DimensionError(f"B must map R^m into the {n}-node function space")
        if self.C.shape[1] != n or (self.C.source, self.C.target) != (Space.FUNCTION, Space.EUCLIDEAN):
            raise DimensionError(f"C must map the {n}-node function space to R^p")
        if self.C.shape[0] != self.exo.p:
            raise DimensionError(
                f"C has {self.C.shape[0]} outputs but Gamma has {self.exo.p} columns"
            )
        if self.P is None:
            object.__setattr__(self, "P", identity(n, self.A.h))
        if self.mu is None:
            object.__setattr__(self, "mu", measure_dissipation(self.A, self.P))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def r(self) -> int:
        return self.exo.r

    @property
    def h(self) -> float:
        return self.A.h

    @property
    def S(self):
        return self.exo.S

    @property
    def Gamma(self):
        return self.exo.Gamma

    @property
    def Q(self):
        return self.exo.Q


def check_plant_assumption(sys: CascadeSystem, tol: float = 0.0) -> CheckReport:
    witness = {"mu": sys.mu, "P_norm": operator_norm(sys.P)}
    if sys.reference_mu is not None:
        witness["reference_mu"] = sys.reference_mu
    return CheckReport("plant_dissipative", sys.mu > tol, witness)


def kalman_matrix(S, Gamma) -> np.ndarray:
    S = np.atleast_2d(S)
    blocks = [np.atleast_2d(Gamma).reshape(S.shape[0], -1)]
    for _ in range(S.shape[0] - 1):
        blocks.append(S @ blocks[-1])
    return np.hstack(blocks)


def check_ode_assumption(exo: ExoSystem, rtol: float = RANK_RTOL) -> CheckReport:
    """Kalman rank of (S, Gamma) and sign of QS + S^T Q."""
    rank = numeric_rank(kalman_matrix(exo.S, exo.Gamma), rtol)
    sym = exo.Q @ exo.S + exo.S.T @ exo.Q
    lam = float(np.linalg.eigvalsh(sym)[-1])
    scale = max(1.0, np.abs(exo.Q).max() * np.abs(exo.S).max())
    controllable = rank == exo.r
    marginal = lam <= 1e-12 * scale
    return CheckReport(
        "ode_controllable_marginal",
        controllable and marginal,
        {
            "kalman_rank": rank,
            "r": exo.r,
            "controllable": controllable,
            "lambda_max_QS": lam,
            "marginally_stable": marginal,
        },
    )


def plant_spectrum(A: OperatorMatrix) -> np.ndarray:
    if A.bands is not None and np.array_equal(A.bands[0], A.bands[2]):
        lo, d, _ = A.bands
        return eigh_tridiagonal(d, lo, eigvals_only=True).astype(complex)
    return np.linalg.eigvals(A.entries)


def check_spectra_disjoint(A: OperatorMatrix, S, tol: float = 1e-8) -> CheckReport:
    spec_a = plant_spectrum(A)
    spec_s = np.linalg.eigvals(np.atleast_2d(S))
    dist = np.abs(spec_a[:, None] - spec_s[None, :])
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    d = float(dist[i, j])
    return CheckReport(
        "spectra_disjoint",
        d > tol and spec_a.size > 0 and spec_s.size > 0,
        {"min_distance": d, "closest_A": spec_a[i], "closest_S": spec_s[j], "tolerance": tol},
    )


def _distinct(values, tol=1e-9):
    out = []
    for v in values:
        if all(abs(v - w) > tol * max(1.0, abs(w)) for w in out):
            out.append(v)
    return out


def check_nonresonance(sys: CascadeSystem, rtol: float = RANK_RTOL) -> CheckReport:
    """Full row rank of [[A - lambda I, B], [C, 0]] at every eigenvalue of S."""
    n, m, p = sys.n, sys.m, sys.p
    if m < p:
        raise DimensionError(f"non-resonance needs m >= p, got m={m}, p={p}")
    A, B, C = sys.A.entries, sys.B.entries, sys.C.entries
    ranks = []
    ok = True
    for lam in _distinct(np.linalg.eigvals(sys.S)):
        block = np.zeros((n + p, n + m), dtype=complex)
        block[:n, :n] = A - lam * np.eye(n)
        block[:n, n:] = B
        block[n:, :n] = C
        rank = numeric_rank(block, rtol)
        ranks.append({"eigenvalue": lam, "rank": rank, "required": n + p})
        ok &= rank == n + p
    return CheckReport("non_resonance", ok, {"ranks": ranks}, required=False)


def check_detectability(S, HQ, rtol: float = RANK_RTOL) -> CheckReport:
    """PBH test: rank [S - lambda I; HQ] = r at every eigenvalue with Re >= 0."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    r = S.shape[0]
    HQ = np.asarray(HQ, dtype=float).reshape(-1, r)
    eig = np.linalg.eigvals(S)
    scale = max(1.0, np.abs(S).max())
    failing = None
    for lam in eig:
        if lam.real < -1e-10 * scale:
            continue
        stacked = np.vstack([S - lam * np.eye(r), HQ.astype(complex)])
        if numeric_rank(stacked, rtol) < r:
            failing = lam
            break
    witness = {"eigenvalues": eig}
    if failing is not None:
        witness["failing_eigenvalue"] = failing
    return CheckReport("detectable", failing is None, witness)


def run_assumption_checks(sys: CascadeSystem) -> list[CheckReport]:
    """Assumptions on the plant, the ODE, the spectra, plus non-resonance."""
    reports = [
        check_plant_assumption(sys),
        check_ode_assumption(sys.exo),
        check_spectra_disjoint(sys.A, sys.S),
    ]
    if sys.m >= sys.p:
        reports.append(check_nonresonance(sys))
    else:
        reports.append(CheckReport("non_resonance", False, {"reason": "m < p"}, required=False))
    return reports


def reports_to_json(reports) -> str:
    payload = {"assumptions": [r.to_dict() for r in reports]}
    return json.dumps(payload, indent=2, sort_keys=True)
