"""Numerical re-verification of a design certificate.

Every check returns a :class:`~forwarding.cascade.CheckReport`; nothing here
raises on a failed inequality.
"""
from __future__ import annotations

import numpy as np

from .cascade import CascadeSystem, CheckReport
from .design import (
    DesignCertificate,
    compute_rho,
    dissipativity_constants,
    gain_H,
    k_star,
    strictification,
)
from .errors import ForwardingError
from .simulate import assemble_closed_loop
from .sylvester import SylvesterSolution

OBSERVER_TOL = 1e-9
DISSIPATIVITY_TOL = 1e-8
MATCH_RTOL = 1e-8


def lyapunov_gram(sys: CascadeSystem, sol: SylvesterSolution, p: float, Pi=None, c: float = 0.0):
    """Symmetric G with V(w) = w^T G w for w = (phi, z); adds c U when Pi is given."""
    n, r = sys.n, sys.r
    E = np.hstack([-sol.M, np.eye(r)])  # z - M phi
    weight = sys.Q * p
    if Pi is not None:
        weight = weight + c * np.asarray(Pi)
    G = E.T @ weight @ E
    G[:n, :n] += sys.h * sys.P.entries
    return 0.5 * (G + G.T)


def state_weight(sys: CascadeSystem) -> np.ndarray:
    """Diagonal of the product-space norm |w|^2 = |phi|_h^2 + |z|^2."""
    return np.concatenate([np.full(sys.n, sys.h), np.ones(sys.r)])


def random_states(sys: CascadeSystem, n_samples: int, seed: int = 0) -> np.ndarray:
    """Half white-noise profiles, half smooth sine combinations; z Gaussian."""
    rng = np.random.default_rng(seed)
    n, r = sys.n, sys.r
    x = np.arange(1, n + 1) * sys.h
    rough = n_samples // 2
    smooth = n_samples - rough
    modes = np.sin(np.pi * np.outer(np.arange(1, 11), x))
    coeffs = rng.normal(size=(smooth, 10)) / np.arange(1, 11)
    phi = np.vstack([rng.normal(size=(rough, n)), coeffs @ modes])
    z = rng.normal(size=(n_samples, r))
    return np.hstack([phi, z])


def _worst_ratio(quad, weight):
    """max over w of w^T quad w / w^T diag(weight) w."""
    s = 1.0 / np.sqrt(weight)
    sym = 0.5 * (quad + quad.T) * np.outer(s, s)
    return float(np.linalg.eigvalsh(sym)[-1])


def check_dissipativity(cert, sys, sol, n_samples=1000, seed=0, tol=DISSIPATIVITY_TOL) -> CheckReport:
    """dV/dt <= -a |phi|^2 - b |HQz|^2 + tol |w|^2 along F.

    dV/dt = 2 <F w, w>_V, the full derivative of the quadratic form.
    """
    n = sys.n
    cl = assemble_closed_loop(sys, cert.H, cert.k, "plus")
    G = lyapunov_gram(sys, sol, cert.p)
    HQ = cert.H @ sys.Q
    # quadratic form of dV/dt + a|phi|^2 + b|HQz|^2
    quad = cl.F.T @ G + G @ cl.F
    quad[:n, :n] += cert.a * sys.h * np.eye(n)
    quad[n:, n:] += cert.b * HQ.T @ HQ
    weight = state_weight(sys)

    w = random_states(sys, n_samples, seed)
    excess = np.einsum("ki,ij,kj->k", w, quad, w)
    norms = w**2 @ weight
    violations = int(np.sum(excess > tol * norms))
    worst = _worst_ratio(quad, weight)
    return CheckReport(
        "certificate_dissipativity",
        violations == 0,
        {
            "samples": n_samples,
            "violations": violations,
            "max_relative_excess": float(np.max(excess / norms)),
            "worst_case_ratio": worst,
            "tolerance": tol,
        },
    )


def check_observer(cert: DesignCertificate, sys: CascadeSystem, tol=OBSERVER_TOL) -> CheckReport:
    S = sys.S
    HQ = cert.H @ sys.Q
    A_cl = S - cert.L @ HQ
    Pi = cert.Pi
    lam = float(np.linalg.eigvalsh(0.5 * (Pi @ A_cl + A_cl.T @ Pi + (Pi @ A_cl + A_cl.T @ Pi).T)
                                   + 2.0 * np.eye(sys.r))[-1])
    sym_err = float(np.abs(Pi - Pi.T).max())
    pi_min = float(np.linalg.eigvalsh(0.5 * (Pi + Pi.T))[0])
    return CheckReport(
        "observer_inequality",
        lam <= tol and pi_min > 0 and sym_err <= 1e-12 * max(1.0, np.abs(Pi).max()),
        {"lambda_max": lam, "Pi_min_eigenvalue": pi_min, "Pi_asymmetry": sym_err,
         "hurwitz_abscissa": float(np.linalg.eigvals(A_cl).real.max())},
    )


def _close(a, b, rtol=MATCH_RTOL):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return a.shape == b.shape and bool(np.allclose(a, b, rtol=rtol, atol=rtol * max(1e-300, np.abs(b).max())))


def check_gain_bound(cert, sys, sol) -> CheckReport:
    """Recompute H, rho, k_star, then the constants (nu, p, a, b) at the stored k."""
    witness = {}
    try:
        H = gain_H(sol, sys.B)
        rho = compute_rho(sys, sol, H)
        ks = k_star(rho)
        witness.update(H_matches=_close(cert.H, H), rho_matches=_close(cert.rho, rho),
                       k_star_matches=_close(cert.k_star, ks), k=cert.k, k_star=ks)
        in_range = 0.0 < cert.k < ks
        witness["k_in_range"] = in_range
        nu, p, a, b = dissipativity_constants(cert.k, cert.epsilon, sys, sol, H)
        witness.update(
            a=a, b=b,
            constants_match=all(_close(x, y) for x, y in
                                ((cert.nu, nu), (cert.p, p), (cert.a, a), (cert.b, b))),
        )
    except ForwardingError as exc:
        witness["error"] = str(exc)
        return CheckReport("gain_bound", False, witness)
    ok = all(witness[key] for key in ("H_matches", "rho_matches", "k_star_matches",
                                      "k_in_range", "constants_match"))
    ok = ok and cert.a > 0 and cert.b > 0 and cert.p > 0
    return CheckReport("gain_bound", ok, witness)


def check_strictification(cert, sys, sol, n_samples=1000, seed=1, tol=DISSIPATIVITY_TOL) -> CheckReport:
    """c within (0, min(a/nu1, b/nu2)) and the algebraic dW/dt bound on random states."""
    n = sys.n
    nu1, nu2, _ = strictification(sol, cert.H, sys.Q, cert.Pi, cert.L, cert.k, cert.a, cert.b)
    bounds = [x / y for x, y in ((cert.a, nu1), (cert.b, nu2)) if y > 0]
    c_ok = cert.c > 0 and (not bounds or cert.c < min(bounds))
    cl = assemble_closed_loop(sys, cert.H, cert.k, "plus")
    G = lyapunov_gram(sys, sol, cert.p, cert.Pi, cert.c)
    HQ = cert.H @ sys.Q
    E = np.hstack([-sol.M, np.eye(sys.r)])
    quad = cl.F.T @ G + G @ cl.F
    quad[:n, :n] += (cert.a - cert.c * nu1) * sys.h * np.eye(n)
    quad[n:, n:] += (cert.b - cert.c * nu2) * HQ.T @ HQ
    quad += cert.c * E.T @ E
    weight = state_weight(sys)
    w = random_states(sys, n_samples, seed)
    excess = np.einsum("ki,ij,kj->k", w, quad, w)
    violations = int(np.sum(excess > tol * (w**2 @ weight)))
    nu_match = _close([cert.nu1, cert.nu2], [nu1, nu2])
    return CheckReport(
        "strict_decay",
        c_ok and nu_match and violations == 0,
        {"nu1": nu1, "nu2": nu2, "c": cert.c, "c_supremum": min(bounds) if bounds else None,
         "nu_match": nu_match, "violations": violations,
         "worst_case_ratio": _worst_ratio(quad, weight)},
    )


def verify_certificate(cert, sys, sol) -> list[CheckReport]:
    reports = [check_gain_bound(cert, sys, sol), check_observer(cert, sys)]
    if reports[0].passed:
        reports.append(check_dissipativity(cert, sys, sol))
        reports.append(check_strictification(cert, sys, sol))
    return reports
