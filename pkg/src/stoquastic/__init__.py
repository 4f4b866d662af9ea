"""Stoquastic local Hamiltonians: exact oracles, random-walk ground-energy
estimation, perturbative gadgets, clock constructions and counting protocols."""
from .errors import (
    CapacityError,
    ConvergenceError,
    InputError,
    NotStoquasticError,
    PostSelectionError,
    PreconditionError,
    ResolventError,
    ScalingError,
    StoquasticError,
)
from .gmatrix import NORM_SHIFT, WALK_SHIFT, GMatrix, to_g_matrix
from .hamiltonian import LocalHamiltonian, LocalTerm
from .stoquastic import StoquasticReport, check_stoquastic

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConvergenceError",
    "GMatrix",
    "InputError",
    "LocalHamiltonian",
    "LocalTerm",
    "NORM_SHIFT",
    "NotStoquasticError",
    "PostSelectionError",
    "PreconditionError",
    "ResolventError",
    "ScalingError",
    "StoquasticError",
    "StoquasticReport",
    "WALK_SHIFT",
    "check_stoquastic",
    "to_g_matrix",
]
