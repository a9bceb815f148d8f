"""Even subharmonic families of the Sitnikov problem.

Continuation in the eccentricity from the circular case, explicit a-priori
bounds along the branches, and linear stability via the Floquet discriminant.
"""

from .circular import CircularCatalog, branch_count, build_catalog, find_branch_roots, xi_star
from .continuation import Branch, BranchPoint, Termination, trace_branch, trace_branch_negative
from .dynamics import OrbitConfig, flow, shooting_value
from .errors import SitnikovError
from .kepler import solve_kepler
from .stability import HillContext, StabilityReport, discriminant, stability_report

__version__ = "0.1.0"

__all__ = [
    "Branch", "BranchPoint", "CircularCatalog", "HillContext", "OrbitConfig", "SitnikovError",
    "StabilityReport", "Termination", "branch_count", "build_catalog", "discriminant",
    "find_branch_roots", "flow", "shooting_value", "solve_kepler", "stability_report",
    "trace_branch", "trace_branch_negative", "xi_star",
]
