"""Forwarding-based stabilization of a stable heat plant cascaded with a marginal ODE."""
from .cascade import CascadeSystem, CheckReport, ExoSystem, run_assumption_checks
from .certify import verify_certificate
from .design import DesignCertificate, compute_rho, design, gain_H, k_star
from .errors import ForwardingError
from .kernels import BACKEND
from .operators import (
    OperatorMatrix,
    SpatialGrid,
    adjoint,
    build_grid,
    discretize_heat,
    operator_norm,
)
from .scenario import build_heat_cascade, integral_action_system, reference_system
from .simulate import assemble_closed_loop, integrate, lyapunov_trace, spectral_abscissa, sweep_k
from .sylvester import SylvesterSolution, analytic_heat_M, solve_sylvester

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CascadeSystem",
    "CheckReport",
    "DesignCertificate",
    "ExoSystem",
    "ForwardingError",
    "OperatorMatrix",
    "SpatialGrid",
    "SylvesterSolution",
    "adjoint",
    "analytic_heat_M",
    "assemble_closed_loop",
    "build_grid",
    "build_heat_cascade",
    "compute_rho",
    "design",
    "discretize_heat",
    "gain_H",
    "integral_action_system",
    "integrate",
    "k_star",
    "lyapunov_trace",
    "operator_norm",
    "reference_system",
    "run_assumption_checks",
    "solve_sylvester",
    "spectral_abscissa",
    "sweep_k",
    "verify_certificate",
]
