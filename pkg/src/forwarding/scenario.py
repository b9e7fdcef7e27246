"""Builders for the heat-equation cascade and the reference scenario."""
from __future__ import annotations

import numpy as np

from .cascade import CascadeSystem, ExoSystem
from .operators import (
    DiscreteFunction,
    SpatialGrid,
    build_control_injector,
    build_grid,
    build_point_observation,
    discretize_heat,
)

ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])
ROTATION_GAMMA = np.array([[1.0], [0.0]])
# Nominal heat-plant dissipation constant, kept as metadata; designs use the measured mu.
HEAT_REFERENCE_MU = np.pi


def constant_profile(grid: SpatialGrid, value: float = 1.0) -> DiscreteFunction:
    return DiscreteFunction(np.full(grid.n_interior, float(value)), grid)


def gaussian_profile(grid: SpatialGrid, center: float, width: float) -> DiscreteFunction:
    return grid.sample(lambda x: np.exp(-0.5 * ((x - center) / width) ** 2))


def build_heat_cascade(
    n_interior: int,
    ell: float,
    S,
    Gamma,
    Q=None,
    b=None,
) -> CascadeSystem:
    """Heat plant phi_t = phi_xx + b u with output phi(ell) driving z' = S z + Gamma y.

    ``b`` may be None (b = 1), a DiscreteFunction, a list of them (m > 1),
    a callable of x, or an array of node samples.
    """
    grid = build_grid(n_interior)
    if b is None:
        profiles = [constant_profile(grid)]
    elif isinstance(b, DiscreteFunction):
        profiles = [b]
    elif callable(b):
        profiles = [grid.sample(b)]
    elif isinstance(b, (list, tuple)) and b and isinstance(b[0], DiscreteFunction):
        profiles = list(b)
    else:
        arr = np.asarray(b, dtype=float)
        arr = arr.reshape(grid.n_interior, -1)
        profiles = [DiscreteFunction(col, grid) for col in arr.T]
    return CascadeSystem(
        A=discretize_heat(grid),
        B=build_control_injector(profiles, grid),
        C=build_point_observation(ell, grid),
        exo=ExoSystem(S, Gamma, Q),
        grid=grid,
        reference_mu=HEAT_REFERENCE_MU,
    )


def reference_system(n_interior: int = 200, ell: float = 1.0 / 3.0) -> CascadeSystem:
    """Heat plant, b = 1, observation at ell = 1/3, rotation exosystem (r = 2)."""
    return build_heat_cascade(n_interior, ell, ROTATION, ROTATION_GAMMA)


def integral_action_system(n_interior: int = 200, ell: float = 1.0 / 3.0) -> CascadeSystem:
    """Same plant with S = 0, Gamma = 1 (r = 1)."""
    return build_heat_cascade(n_interior, ell, [[0.0]], [[1.0]])


def reference_initial_state(sys: CascadeSystem) -> np.ndarray:
    """phi0 = sin(pi x), z0 = (1, 0, ..., 0) stacked as w = (phi, z)."""
    x = np.arange(1, sys.n + 1) * sys.h
    z0 = np.zeros(sys.r)
    z0[0] = 1.0
    return np.concatenate([np.sin(np.pi * x), z0])
