"""Wasserstein barycenters by iterative Bregman projections, proximal IBP and
accelerated primal-dual gradient descent over communication graphs."""

from .agd import agd_solve, calibrate
from .core import BarycenterProblem, CostMatrix, Histogram, TransportPlan, Weights
from .entropic import conjugate_grad, conjugate_value, reg_ot_cost
from .errors import (
    BarylabError,
    CapExceeded,
    DegenerateInput,
    DimensionMismatch,
    DisconnectedGraph,
    DomainError,
    IterationCapExceeded,
    LocalityViolation,
    NonConvergence,
    NumericalError,
    ParseError,
)
from .graph import GraphLaplacian, laplacian
from .ibp import barycenter_ibp, ibp_solve
from .prox_ibp import ProxConfig, gamma_restart_probe, prox_ibp_solve
from .rounding import round_to_feasible

__version__ = "0.1.0"

__all__ = [
    "BarycenterProblem",
    "BarylabError",
    "CapExceeded",
    "CostMatrix",
    "DegenerateInput",
    "DimensionMismatch",
    "DisconnectedGraph",
    "DomainError",
    "GraphLaplacian",
    "Histogram",
    "IterationCapExceeded",
    "LocalityViolation",
    "NonConvergence",
    "NumericalError",
    "ParseError",
    "ProxConfig",
    "TransportPlan",
    "Weights",
    "agd_solve",
    "barycenter_ibp",
    "calibrate",
    "conjugate_grad",
    "conjugate_value",
    "gamma_restart_probe",
    "ibp_solve",
    "laplacian",
    "prox_ibp_solve",
    "reg_ot_cost",
]
