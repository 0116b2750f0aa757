"""Weighted kernel algebras on finitely generated groups.

Word-metric geometry for Z^d, the discrete Heisenberg group and free
groups; invariant and finite-section kernels with matrix coefficients;
polynomially weighted norms, Schur-type operator bounds and a Neumann-series
inversion for finite sections.
"""

from .errors import (
    GroupKernelError,
    NonConvergenceError,
    PreconditionError,
    ValidationError,
)
from .groups import FreeGroup, GroupElement, Heisenberg3, IntegerLattice, ball, ball_sizes, growth_analysis, parse_group
from .kernels import (
    InvariantKernel,
    Weight,
    WindowedKernel,
    adjoint_kernel,
    compose,
    envelope,
    random_kernel,
    truncate,
    weighted_norm,
    window_kernel,
)
from .analysis import check_schur_bound, op_norm_2, power_norm_experiment, schur_constant, truncation_error
from .inversion import inverse_closedness_report, near_identity, neumann_inverse, spectral_bounds

__version__ = "0.1.0"

__all__ = [
    "FreeGroup",
    "GroupElement",
    "GroupKernelError",
    "Heisenberg3",
    "IntegerLattice",
    "InvariantKernel",
    "NonConvergenceError",
    "PreconditionError",
    "ValidationError",
    "Weight",
    "WindowedKernel",
    "adjoint_kernel",
    "ball",
    "ball_sizes",
    "check_schur_bound",
    "compose",
    "envelope",
    "growth_analysis",
    "inverse_closedness_report",
    "near_identity",
    "neumann_inverse",
    "op_norm_2",
    "parse_group",
    "power_norm_experiment",
    "random_kernel",
    "schur_constant",
    "spectral_bounds",
    "truncate",
    "truncation_error",
    "weighted_norm",
    "window_kernel",
]
