"""Discrete function space on (0, 1) and tagged operators acting on it.

Functions are sampled at the interior nodes of a uniform grid and carry the
rectangle-rule inner product ``<u, v>_h = h * sum(u * v)``. Every operator
records whether its domain and range are the weighted function space or a
plain Euclidean space, because the Hilbert adjoint depends on the weights.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ContractError, DimensionError, DomainError, InvalidGridError


class Space(str, enum.Enum):
    FUNCTION = "function"
    EUCLIDEAN = "euclidean"


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid on (0, 1) with the two Dirichlet endpoints removed."""

    n_interior: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n_interior) != self.n_interior or self.n_interior < 2:
            raise InvalidGridError(f"need at least 2 interior nodes, got {self.n_interior}")
        n = int(self.n_interior)
        object.__setattr__(self, "n_interior", n)
        object.__setattr__(self, "h", 1.0 / (n + 1))
        object.__setattr__(self, "nodes", _frozen(np.arange(1, n + 1) / (n + 1)))

    def sample(self, func) -> "DiscreteFunction":
        return DiscreteFunction(np.asarray(func(self.nodes), dtype=float), self)

    def __eq__(self, other):
        return isinstance(other, SpatialGrid) and other.n_interior == self.n_interior

    def __hash__(self):
        return hash(("SpatialGrid", self.n_interior))


def build_grid(n_interior: int) -> SpatialGrid:
    return SpatialGrid(n_interior)


@dataclass(frozen=True)
class DiscreteFunction:
    values: np.ndarray
    grid: SpatialGrid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_interior,):
            raise DimensionError(
                f"expected {self.grid.n_interior} samples, got shape {values.shape}"
            )
        object.__setattr__(self, "values", _frozen(values))

    def norm(self) -> float:
        return float(np.sqrt(inner_product(self, self)))


def inner_product(u: DiscreteFunction, v: DiscreteFunction) -> float:
    if u.grid != v.grid:
        raise DimensionError("functions live on different grids")
    return float(u.grid.h * np.dot(u.values, v.values))


@dataclass(frozen=True)
class OperatorMatrix:
    """Matrix of a linear map between tagged spaces.

    ``h`` is the quadrature weight of the function space; it is only used
    when one of the two sides is ``Space.FUNCTION``. ``bands`` optionally
    keeps the (lower, diag, upper) diagonals of a tridiagonal matrix so that
    solvers can exploit the structure.
    """

    entries: np.ndarray
    source: Space | None
    target: Space | None
    h: float = 1.0
    bands: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        entries = np.atleast_2d(np.asarray(self.entries, dtype=float))
        object.__setattr__(self, "entries", _frozen(entries))
        if self.bands is not None:
            object.__setattr__(self, "bands", tuple(_frozen(b) for b in self.bands))

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            if other.target != self.source:
                raise DimensionError(
                    f"cannot compose {self.source}->{self.target} after "
                    f"{other.source}->{other.target}"
                )
            if self.shape[1] != other.shape[0]:
                raise DimensionError(f"shape mismatch {self.shape} @ {other.shape}")
            return OperatorMatrix(
                self.entries @ other.entries, other.source, self.target, h=self._weight_h(other)
            )
        if isinstance(other, DiscreteFunction):
            if self.source is not Space.FUNCTION:
                raise DimensionError("operator does not act on functions")
            other = other.values
        return self.entries @ np.asarray(other)

    def _weight_h(self, other):
        if Space.FUNCTION in (self.source, self.target):
            return self.h
        return other.h

    def _weights(self):
        if self.source is None or self.target is None:
            raise ContractError("operator has no space tags")
        ws = self.h if self.source is Space.FUNCTION else 1.0
        wt = self.h if self.target is Space.FUNCTION else 1.0
        return ws, wt


def discretize_heat(grid: SpatialGrid) -> OperatorMatrix:
    """Second-difference Dirichlet Laplacian ``tridiag(1, -2, 1) / h**2``."""
    n, h = grid.n_interior, grid.h
    off = np.full(n - 1, 1.0 / h**2)
    diag = np.full(n, -2.0 / h**2)
    dense = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    return OperatorMatrix(dense, Space.FUNCTION, Space.FUNCTION, h=h, bands=(off, diag, off))


def heat_spectrum(grid: SpatialGrid) -> np.ndarray:
    """Closed-form eigenvalues of :func:`discretize_heat`, ascending."""
    n, h = grid.n_interior, grid.h
    k = np.arange(n, 0, -1)
    return -4.0 / h**2 * np.sin(k * np.pi * h / 2.0) ** 2


def build_control_injector(b_samples, grid: SpatialGrid | None = None) -> OperatorMatrix:
    """Map ``u in R^m`` to the function ``sum_j b_j u_j``.

    ``b_samples`` is one DiscreteFunction or a sequence of them (one per input).
    """
    if isinstance(b_samples, DiscreteFunction):
        b_samples = [b_samples]
    b_samples = list(b_samples)
    if grid is None:
        if not b_samples:
            raise DimensionError("need a grid when there are no input profiles")
        grid = b_samples[0].grid
    for b in b_samples:
        if b.grid != grid:
            raise DimensionError("control profile sampled on a different grid")
    cols = np.column_stack([b.values for b in b_samples]) if b_samples else np.zeros((grid.n_interior, 0))
    return OperatorMatrix(cols.reshape(grid.n_interior, -1), Space.EUCLIDEAN, Space.FUNCTION, h=grid.h)


def point_observation_weights(ell: float, grid: SpatialGrid) -> np.ndarray:
    if not 0.0 < ell < 1.0:
        raise DomainError(f"observation point must lie in (0, 1), got {ell}")
    n, h = grid.n_interior, grid.h
    s = ell / h  # position in units of h; node i sits at s == i
    row = np.zeros(n)
    i = int(np.floor(s))
    t = s - i
    if t > 1.0 - 1e-9:
        i, t = i + 1, 0.0
    elif t < 1e-9:
        t = 0.0
    # boundary values are zero, so weights on nodes 0 and n+1 are dropped
    if 1 <= i <= n:
        row[i - 1] += 1.0 - t
    if t > 0.0 and 1 <= i + 1 <= n:
        row[i] += t
    return row


def build_point_observation(ell: float, grid: SpatialGrid) -> OperatorMatrix:
    """Evaluation at ``ell`` by linear interpolation between bracketing nodes."""
    row = point_observation_weights(ell, grid)
    return OperatorMatrix(row[None, :], Space.FUNCTION, Space.EUCLIDEAN, h=grid.h)


def adjoint(K: OperatorMatrix) -> OperatorMatrix:
    """Hilbert adjoint with respect to the tagged inner products.

    ``<K u, v>_target = <u, K* v>_source``, so ``K* = W_s^{-1} K^T W_t`` with
    ``W = h`` on the function space and ``1`` on Euclidean space.
    """
    ws, wt = K._weights()
    entries = K.entries.T * (wt / ws)
    bands = None
    if K.bands is not None and ws == wt:
        lo, d, up = K.bands
        bands = (up, d, lo)
    return OperatorMatrix(entries, K.target, K.source, h=K.h, bands=bands)


def operator_norm(K: OperatorMatrix) -> float:
    """Induced norm between the tagged spaces (largest weighted singular value)."""
    ws, wt = K._weights()
    if K.entries.size == 0:
        return 0.0
    scaled = K.entries * np.sqrt(wt / ws)
    if K.bands is not None and ws == wt and np.array_equal(K.bands[0], K.bands[2]):
        lo, d, _ = K.bands
        ev = eigh_tridiagonal(d, lo, eigvals_only=True)
        return float(np.max(np.abs(ev)))
    return float(np.linalg.norm(scaled, 2))


def identity(n: int, h: float) -> OperatorMatrix:
    return OperatorMatrix(
        np.eye(n), Space.FUNCTION, Space.FUNCTION, h=h,
        bands=(np.zeros(n - 1), np.ones(n), np.zeros(n - 1)),
    )
