"""Explicit local time-stepping Adams-Bashforth solvers for 1D damped waves."""

__version__ = "0.1.0"

from .coeffs import (
    CoefficientSet,
    RationalPoly,
    ab_coefficients,
    coefficient_set,
    gamma_poly,
    gamma_tilde_poly,
    lts_beta,
    verify_identities,
)
from .mesh import DofPartition, Mesh1D, build_mesh, fine_dof_mask, load_mesh, save_mesh
