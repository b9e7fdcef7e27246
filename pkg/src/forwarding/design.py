"""Feedback gain, certified gain bound and Lyapunov certificate constants.

The feedback is u = k H Q z with H = B* M*. For every 0 < k < k_star the
functional

    V(z, phi) = <P phi, phi> + p (z - M phi)^T Q (z - M phi)

decreases along closed-loop solutions, and W = V + c (z - M phi)^T Pi (z - M phi)
is a strict Lyapunov functional once (S, HQ) is detectable.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_are, solve_continuous_lyapunov
from scipy.signal import place_poles

from .cascade import CascadeSystem, check_detectability
from .errors import (
    CertificateImpossibleError,
    DegenerateGainError,
    DimensionError,
    GainTooLargeError,
)
from .operators import OperatorMatrix, operator_norm
from .sylvester import SylvesterSolution, m_operator_norm

# maximizer of s(1-s)/(1+s) on (0,1): positive root of s^2 + 2s - 1
EPS_STAR = math.sqrt(2.0) - 1.0
C_DEFAULT = 1.0

CONSTANT_NAMES = ("H", "rho", "k_star", "k", "epsilon", "nu", "p", "a", "b",
                  "L", "Pi", "nu1", "nu2", "c")


def gain_ratio(s):
    """sqrt(s (1 - s) / (1 + s)), the factor maximized in the k_star bound."""
    s = np.asarray(s, dtype=float)
    return np.sqrt(s * (1.0 - s) / (1.0 + s))


def gain_H(sol: SylvesterSolution, B: OperatorMatrix) -> np.ndarray:
    """H = B* M*, which in node coordinates is (M B)^T: the h weights cancel."""
    if B.shape[0] != sol.M.shape[1]:
        raise DimensionError(f"B has {B.shape[0]} rows, M has {sol.M.shape[1]} columns")
    return np.ascontiguousarray((sol.M @ B.entries).T)


def compute_rho(sys: CascadeSystem, sol: SylvesterSolution, H) -> float:
    """rho = mu / (|P| |B| |M| |H| |Q|).

    The |Q| factor is 1 for Q = I; for general Q it keeps the
    Young-inequality step on the cross term valid.
    """
    H = np.atleast_2d(H)
    h_norm = float(np.linalg.norm(H, 2)) if H.size else 0.0
    if h_norm == 0.0:
        raise DegenerateGainError("H = 0: the feedback gain vanishes and (S, HQ) cannot be detectable")
    denom = (operator_norm(sys.P) * operator_norm(sys.B) * m_operator_norm(sol)
             * h_norm * float(np.linalg.norm(sys.Q, 2)))
    return float(sys.mu / denom)


def k_star(rho: float) -> float:
    if rho <= 0:
        raise ValueError("rho must be positive")
    return float(rho * gain_ratio(EPS_STAR))


def dissipativity_constants(k, eps, sys: CascadeSystem, sol: SylvesterSolution, H):
    """Return (nu, p, a, b) for gain ``k`` and splitting parameter ``eps``.

    Raises GainTooLargeError when a <= 0, i.e. k is not below the bound
    allowed by this ``eps``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if k <= 0:
        raise ValueError("k must be positive")
    mu = sys.mu
    rho = compute_rho(sys, sol, H)
    PB = operator_norm(sys.P) * operator_norm(sys.B)
    nu = mu * (1.0 - eps) / k
    p = PB**2 * (1.0 + eps) / nu
    a = mu * (eps - (1.0 + eps) / (1.0 - eps) * k**2 / rho**2)
    b = eps / (1.0 + eps) * k * p
    if a <= 1e-12 * mu:
        raise GainTooLargeError(f"a <= 0 (a = {a:.3e}): k = {k:.6g} too large for epsilon = {eps:.6g}")
    return nu, p, a, b


def observer_injection(S, HQ):
    """Output injection L with S - L HQ Hurwitz and Pi solving the Lyapunov equality.

    Pi (S - L HQ) + (S - L HQ)^T Pi = -2 I. For a single output row the
    eigenvalues are placed at -1, ..., -r; otherwise L comes from the dual
    Riccati equation. When S is already Hurwitz, L = 0.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    r = S.shape[0]
    HQ = np.asarray(HQ, dtype=float).reshape(-1, r)
    if not check_detectability(S, HQ):
        raise CertificateImpossibleError("(S, HQ) is not detectable")
    if np.linalg.eigvals(S).real.max() < 0:
        L = np.zeros((r, HQ.shape[0]))
    else:
        L = None
        if HQ.shape[0] == 1:
            poles = -np.arange(1.0, r + 1.0)
            try:
                L = place_poles(S.T, HQ.T, poles).gain_matrix.T
            except ValueError:
                L = None
            if L is not None:
                placed = np.sort(np.linalg.eigvals(S - L @ HQ).real)
                if not np.allclose(placed, np.sort(poles), atol=1e-6):
                    L = None
        if L is None:
            X = solve_continuous_are(S.T, HQ.T, np.eye(r), np.eye(HQ.shape[0]))
            L = X @ HQ.T
    A_cl = S - L @ HQ
    Pi = solve_continuous_lyapunov(A_cl.T, -2.0 * np.eye(r))
    Pi = 0.5 * (Pi + Pi.T)
    return L, Pi


def strictification(sol: SylvesterSolution, H, Q, Pi, L, k, a, b):
    """(nu1, nu2, c) for W = V + c U.

    nu1 = 2 |Pi L HQ|^2 |M|^2 bounds the phi coupling in dU/dt and
    nu2 = 2 |Pi (k M B - L)|^2 the HQz coupling (M B = H^T). c is half the
    admissible supremum min(a/nu1, b/nu2); zero nu's impose no bound.
    """
    H = np.atleast_2d(H)
    HQ = H @ Q
    m_norm = m_operator_norm(sol)
    nu1 = 2.0 * np.linalg.norm(Pi @ L @ HQ, 2) ** 2 * m_norm**2
    nu2 = 2.0 * np.linalg.norm(Pi @ (k * H.T - L), 2) ** 2
    bounds = [x / y for x, y in ((a, nu1), (b, nu2)) if y > 0]
    c = 0.5 * min(bounds) if bounds else C_DEFAULT
    return float(nu1), float(nu2), float(c)


def _as_batch(phi, z):
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return phi, z


def evaluate_V(phi, z, p, sol: SylvesterSolution, Q, P=None):
    """V = <P phi, phi>_h + p (z - M phi)^T Q (z - M phi); batched over rows."""
    phi, z = _as_batch(phi, z)
    h = sol.grid.h
    Pphi = phi if P is None else phi @ np.asarray(getattr(P, "entries", P)).T
    e = z - phi @ sol.M.T
    out = h * np.einsum("ki,ki->k", Pphi, phi) + p * np.einsum("ki,ij,kj->k", e, Q, e)
    return out if out.size > 1 else float(out[0])


def evaluate_U(phi, z, sol: SylvesterSolution, Pi):
    phi, z = _as_batch(phi, z)
    e = z - phi @ sol.M.T
    out = np.einsum("ki,ij,kj->k", e, Pi, e)
    return out if out.size > 1 else float(out[0])


def evaluate_W(phi, z, p, c, sol: SylvesterSolution, Q, Pi, P=None):
    return evaluate_V(phi, z, p, sol, Q, P) + c * evaluate_U(phi, z, sol, Pi)


@dataclass
class DesignCertificate:
    H: np.ndarray
    rho: float
    k_star: float
    k: float
    epsilon: float
    nu: float
    p: float
    a: float
    b: float
    L: np.ndarray
    Pi: np.ndarray
    nu1: float
    nu2: float
    c: float
    meta: dict = field(default_factory=dict)

    @property
    def eps_W(self) -> float:
        """Decay margin in dW/dt <= -eps_W (|phi|^2 + c |z - M phi|^2)."""
        return float(min(self.a - self.c * self.nu1, 1.0))

    def to_dict(self) -> dict:
        out = {}
        for name in CONSTANT_NAMES:
            v = getattr(self, name)
            out[name] = np.asarray(v).tolist() if isinstance(v, np.ndarray) else float(v)
        out["meta"] = dict(self.meta)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "DesignCertificate":
        missing = [n for n in CONSTANT_NAMES if n not in payload]
        if missing:
            raise KeyError(f"certificate is missing {missing}")
        kwargs = {}
        for name in CONSTANT_NAMES:
            v = payload[name]
            kwargs[name] = np.atleast_2d(np.asarray(v, dtype=float)) if name in ("H", "L", "Pi") else float(v)
        return cls(**kwargs, meta=dict(payload.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "DesignCertificate":
        return cls.from_dict(json.loads(text))

    def same_as(self, other: "DesignCertificate") -> bool:
        for name in CONSTANT_NAMES:
            x, y = getattr(self, name), getattr(other, name)
            if not np.array_equal(np.asarray(x), np.asarray(y)):
                return False
        return True


def design(
    sys: CascadeSystem,
    sol: SylvesterSolution,
    k: float | None = None,
    epsilon: float | None = None,
    sign: str = "plus",
) -> DesignCertificate:
    """Assemble the full certificate; ``k`` defaults to k_star / 2."""
    H = gain_H(sol, sys.B)
    rho = compute_rho(sys, sol, H)
    ks = k_star(rho)
    eps = EPS_STAR if epsilon is None else float(epsilon)
    k = 0.5 * ks if k is None else float(k)
    nu, p, a, b = dissipativity_constants(k, eps, sys, sol, H)
    HQ = H @ sys.Q
    L, Pi = observer_injection(sys.S, HQ)
    nu1, nu2, c = strictification(sol, H, sys.Q, Pi, L, k, a, b)
    meta = {
        "sign": sign,
        "mu": sys.mu,
        "P_norm": operator_norm(sys.P),
        "B_norm": operator_norm(sys.B),
        "M_norm": m_operator_norm(sol),
        "H_norm": float(np.linalg.norm(H, 2)),
        "Q_norm": float(np.linalg.norm(sys.Q, 2)),
        "n_interior": sys.n,
        "r": sys.r,
        "m": sys.m,
        "outputs": sys.p,
    }
    if sys.reference_mu is not None:
        meta["reference_mu"] = sys.reference_mu
    return DesignCertificate(H, rho, ks, k, eps, nu, p, a, b, L, Pi, nu1, nu2, c, meta)


def norm_equivalence_constants(cert: DesignCertificate, sys: CascadeSystem, sol: SylvesterSolution):
    """Constants c1 <= c2 with c1 (|phi|^2 + |z|^2) <= V <= c2 (|phi|^2 + |z|^2).

    Upper: |z - M phi|^2 <= 2|z|^2 + 2|M|^2 |phi|^2. Lower: coercivity of P and
    |v1 - v2|^2 >= theta (|v1|^2 / 2 - |v2|^2) for theta in (0, 1), with theta
    chosen so that half of the coercivity margin survives.
    """
    P = sys.P.entries
    eig_p = np.linalg.eigvalsh(0.5 * (P + P.T))
    alpha, p_norm = float(eig_p[0]), float(eig_p[-1])
    eig_q = np.linalg.eigvalsh(sys.Q)
    q_min, q_max = float(eig_q[0]), float(eig_q[-1])
    m2 = m_operator_norm(sol) ** 2
    p = cert.p
    c2 = max(p_norm + 2.0 * p * q_max * m2, 2.0 * p * q_max)
    theta = 0.99 if m2 == 0 else min(0.99, alpha / (2.0 * p * q_min * m2))
    c1 = min(alpha - p * q_min * theta * m2, 0.5 * p * q_min * theta)
    return float(c1), float(c2)
