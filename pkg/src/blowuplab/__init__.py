"""Numerical laboratory for radial blow-up of u_t - Laplace(u) = e^u L(e^u)."""

__version__ = "0.1.0"

from .nonlin import BUILTIN_NAMES, FamilyError, NonlinearityFamily, make_builtin
from .resolvent import DomainError, OdeSolution, ResolventTable

__all__ = [
    "BUILTIN_NAMES",
    "DomainError",
    "FamilyError",
    "NonlinearityFamily",
    "OdeSolution",
    "ResolventTable",
    "make_builtin",
]
