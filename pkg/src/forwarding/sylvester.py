"""Solutions of S M - M A = -Gamma C.

The numeric route transposes the equation, Schur-factors the small matrix
S^T and then performs one shifted tridiagonal solve per Schur column.
For the heat plant a closed-form M(x) is also available.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm, schur

from . import kernels
from .cascade import CascadeSystem, plant_spectrum
from .errors import ConditioningError, DimensionError, RepresentationError
from .operators import DiscreteFunction, OperatorMatrix, Space, SpatialGrid, build_grid

SEPARATION_RTOL = 1e-12


@dataclass(frozen=True)
class SylvesterSolution:
    """Matrix of M (r x N) acting on node samples, so (M phi)_i = M[i] @ phi."""

    M: np.ndarray
    grid: SpatialGrid
    residual: float | None = None
    source: str = "numeric"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        M = np.atleast_2d(np.array(self.M, dtype=float))
        if M.shape[1] != self.grid.n_interior:
            raise DimensionError(f"M has {M.shape[1]} columns, grid has {self.grid.n_interior} nodes")
        M.setflags(write=False)
        object.__setattr__(self, "M", M)

    @property
    def r(self) -> int:
        return self.M.shape[0]

    @property
    def operator(self) -> OperatorMatrix:
        return OperatorMatrix(self.M, Space.FUNCTION, Space.EUCLIDEAN, h=self.grid.h)

    @property
    def riesz_rows(self) -> list[DiscreteFunction]:
        return riesz_rows(self)


def sylvester_residual(S, M, A, GammaC) -> float:
    """Relative Frobenius residual of S M - M A + Gamma C (0 when Gamma C = 0)."""
    ref = np.linalg.norm(GammaC)
    res = np.linalg.norm(S @ M - M @ A + GammaC)
    if ref == 0.0:
        return float(res)
    return float(res / ref)


def _grid_for(sys: CascadeSystem) -> SpatialGrid:
    if isinstance(sys.grid, SpatialGrid):
        return sys.grid
    return build_grid(sys.n)


def solve_sylvester(sys: CascadeSystem, schur_sort=None, backend=None) -> SylvesterSolution:
    """Solve S M - M A = -Gamma C on the discretized plant.

    Parameters
    ----------
    sys : CascadeSystem
    schur_sort : str or callable, optional
        Passed to :func:`scipy.linalg.schur` to reorder the Schur form.
        Different orderings must give the same M.
    backend : {'cython', 'python'}, optional
        Kernel backend for the shifted tridiagonal solves.

    Raises
    ------
    ConditioningError
        If an eigenvalue of S (nearly) coincides with one of A.
    """
    grid = _grid_for(sys)
    S, A = sys.S, sys.A.entries
    GC = sys.Gamma @ sys.C.entries
    n, r = sys.n, sys.r
    if not np.any(GC):
        return SylvesterSolution(np.zeros((r, n)), grid, 0.0, "numeric")

    # X = M^T solves X S^T - A^T X = -C^T Gamma^T
    if schur_sort is None:
        T, U = schur(S.T.astype(complex), output="complex")
    else:
        T, U, _ = schur(S.T.astype(complex), output="complex", sort=schur_sort)
    R = -(GC.T @ U)

    spec_a = plant_spectrum(sys.A)
    scale = max(1.0, float(np.max(np.abs(spec_a))))
    for j in range(r):
        sep = float(np.min(np.abs(spec_a - T[j, j])))
        if sep <= SEPARATION_RTOL * scale:
            raise ConditioningError(
                f"eigenvalue {T[j, j]:.6g} of S is within {sep:.3g} of the spectrum of A",
                shift=complex(T[j, j]),
            )

    Y = np.empty((n, r), dtype=complex)
    bands = sys.A.bands
    for j in range(r):
        rhs = R[:, j] - Y[:, :j] @ T[:j, j]
        try:
            if bands is not None:
                lo, d, up = bands
                # (t I - A^T): A^T has lower/upper swapped
                Y[:, j] = kernels.tridiag_solve(-up, T[j, j] - d, -lo, rhs, backend=backend)
            else:
                Y[:, j] = np.linalg.solve(T[j, j] * np.eye(n) - A.T, rhs)
        except (ZeroDivisionError, np.linalg.LinAlgError) as exc:
            raise ConditioningError(
                f"shifted solve failed at shift {T[j, j]:.6g}: {exc}", shift=complex(T[j, j])
            ) from exc
        if not np.all(np.isfinite(Y[:, j])):
            raise ConditioningError(f"non-finite solution at shift {T[j, j]:.6g}", shift=complex(T[j, j]))

    X = Y @ U.conj().T
    M = np.ascontiguousarray(X.T.real)
    return SylvesterSolution(M, grid, sylvester_residual(S, M, A, GC), "numeric")


def riesz_rows(sol: SylvesterSolution) -> list[DiscreteFunction]:
    """Functions M_i with (M phi)_i = <M_i, phi>_h, i.e. the rows of M divided by h."""
    return [DiscreteFunction(row / sol.grid.h, sol.grid) for row in sol.M]


def m_operator_norm(sol: SylvesterSolution) -> float:
    """Norm of M from the weighted function space to Euclidean R^r."""
    if not np.any(sol.M):
        return 0.0
    return float(np.linalg.norm(sol.M / np.sqrt(sol.grid.h), 2))


@dataclass(frozen=True)
class AnalyticHeatM:
    """Closed-form M(x) for the heat plant with point observation at ``ell``.

    M(x) = E1 exp(F x) N0 on (0, ell) and picks up E1 exp(F (x - ell)) G on
    (ell, 1). The first block of G is zero so M is continuous at ``ell``
    while M' jumps by Gamma.
    """

    F: np.ndarray
    G: np.ndarray
    E1: np.ndarray
    N0: np.ndarray
    ell: float

    @property
    def r(self) -> int:
        return self.E1.shape[0]

    @property
    def E2(self) -> np.ndarray:
        return self.E1 @ self.F

    def __call__(self, x) -> np.ndarray:
        """Evaluate M at the points ``x``; returns an (r, len(x)) array."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        left = expm(self.F[None, :, :] * x[:, None, None]) @ self.N0
        out = (self.E1 @ left)[..., 0]
        right = x > self.ell
        if np.any(right):
            jump = expm(self.F[None, :, :] * (x[right] - self.ell)[:, None, None]) @ self.G
            out[right] += (self.E1 @ jump)[..., 0]
        return out.T

    def sample(self, grid: SpatialGrid, sys: CascadeSystem | None = None) -> SylvesterSolution:
        """Matrix representation on ``grid`` (rows are h * M(x_i))."""
        M = grid.h * self(grid.nodes)
        residual = None
        if sys is not None:
            residual = sylvester_residual(sys.S, M, sys.A.entries, sys.Gamma @ sys.C.entries)
        return SylvesterSolution(M, grid, residual, "analytic-sampled")


def analytic_heat_M(S, Gamma, ell: float, cond_max: float = 1e12) -> AnalyticHeatM:
    S = np.atleast_2d(np.asarray(S, dtype=float))
    r = S.shape[0]
    Gamma = np.asarray(Gamma, dtype=float).reshape(r, -1)
    if Gamma.shape[1] != 1:
        raise DimensionError("closed-form M is for a single point observation (p = 1)")
    if not 0.0 < ell < 1.0:
        raise RepresentationError(f"observation point must lie in (0, 1), got {ell}")
    Z, I = np.zeros((r, r)), np.eye(r)
    F = np.block([[Z, I], [S, Z]])
    G = np.vstack([np.zeros((r, 1)), Gamma])
    E1 = np.hstack([I, Z])
    block = np.vstack([E1, E1 @ expm(F)])
    if np.linalg.cond(block) > cond_max:
        raise RepresentationError(
            "boundary block [E1; E1 exp(F)] is singular for this S; "
            "S has an eigenvalue -(k pi)^2"
        )
    # M(0) = 0 and M(1) = 0
    rhs = np.vstack([np.zeros((r, 1)), -E1 @ expm(F * (1.0 - ell)) @ G])
    N0 = np.linalg.solve(block, rhs)
    return AnalyticHeatM(F, G, E1, N0, float(ell))


def save_solution(sol: SylvesterSolution, json_path, csv_path) -> None:
    """Write metadata as JSON and M(x_i) = M[i]/h samples as CSV."""
    meta = {
        "r": sol.r,
        "N": sol.grid.n_interior,
        "h": sol.grid.h,
        "residual": sol.residual,
        "source": sol.source,
        "csv": Path(csv_path).name,
    }
    Path(json_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    rows = sol.M.T / sol.grid.h
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x"] + [f"M_{i + 1}" for i in range(sol.r)])
        for x, vals in zip(sol.grid.nodes, rows):
            writer.writerow([repr(float(x))] + [repr(float(v)) for v in vals])


def load_solution(json_path, csv_path=None) -> SylvesterSolution:
    meta = json.loads(Path(json_path).read_text())
    if csv_path is None:
        csv_path = Path(json_path).with_name(meta["csv"])
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        vals = np.array([[float(v) for v in row[1:]] for row in reader])
    grid = build_grid(int(meta["N"]))
    return SylvesterSolution(vals.T * grid.h, grid, meta.get("residual"), meta.get("source", "numeric"))
