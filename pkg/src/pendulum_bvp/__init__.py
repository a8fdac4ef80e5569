"""Time maps, bifurcation branches and a shooting oracle for the pendulum
boundary value problem x'' = -sin 2x, x(-L) = -phi, x'(L) = phi_star."""

from .errors import DivergenceError, DomainError, MonotoneBranchError, NonIntegrableError
from .timemaps import BoundaryConfig, BranchId, ZDomain, branch_domain, branch_time, make_config

__version__ = "0.1.0"

__all__ = [
    "BoundaryConfig",
    "BranchId",
    "DivergenceError",
    "DomainError",
    "MonotoneBranchError",
    "NonIntegrableError",
    "ZDomain",
    "branch_domain",
    "branch_time",
    "make_config",
]
