"""Second boundary value flow for Lagrangian-angle operators on convex planar domains.

Solves ``u_t = F_tau(lambda(D^2 u)) - f(x)`` in a convex domain with the
gradient-image condition ``Du(Omega) = Omega~``, and tracks the translation
speed ``c_inf`` of the limiting solution together with runtime checks of
the flow's a priori estimates.
"""

from .diagnostics import (AdmissibilityReport, EstimateLedger, c2_pinch, check_admissibility,
                          eigenvalue_window, obliqueness, udot_bounds)
from .domains import BoundaryPoint, ConvexDomain, DomainKind
from .errors import *  # noqa: F401,F403
from .flow import (FlowGrid, FlowProblem, FlowState, ForcingFunction, NodeKind, RunResult,
                   StepReport, build_grid, discrete_hessian, enforce_boundary,
                   quadratic_initial, step)
from .legendre import DualField, dual_flow_residual, legendre_transform
from .operators import Branch, SpectralOperator, StructureWindow, Tau
from .spectral import EigenPair, SymMatrix2, apply_operator, eigen, operator_derivative

__version__ = "0.1.0"
