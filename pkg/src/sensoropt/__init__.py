"""Optimal sensor and actuator design on the manifold of rank-p projectors.

The cost ``J(C) = tr(L K)`` couples an algebraic Riccati equation to the
choice of a rank-``p`` orthogonal projector ``C = c^T c``.  The package
evaluates ``J`` with its gradient and Hessian, follows the double-bracket
descent flow, enumerates and classifies extremal points, checks the
steady-state error covariance by simulation, and runs seeded Monte Carlo
studies.
"""

__version__ = "0.1.0"

from .densela import care_solve, lyapunov_solve, random_stable, sym_eig
from .errors import (ClassificationError, ContinuationError, DegeneracyError,
                     DimensionError, InputError, InstabilityError, SensorOptError,
                     SolverError, StagnationError)
from .extremal import (census_prediction, continue_all, continue_extremal,
                       enumerate_extremals_gamma0, gamma_star, signature_census,
                       signature_formula)
from .flow import FlowOptions, classify_limit, flow_run, flow_step
from .isospectral import Projector, random_projector, retract, tangent_basis
from .kalmansim import SimConfig, compare_sensors, simulate_error_cov
from .objective import (SensorProblem, cost_J, evaluate, grad_J, hessian_form,
                        hessian_matrix)

__all__ = [
    "care_solve", "lyapunov_solve", "random_stable", "sym_eig",
    "ClassificationError", "ContinuationError", "DegeneracyError", "DimensionError",
    "InputError", "InstabilityError", "SensorOptError", "SolverError",
    "StagnationError", "census_prediction", "continue_all", "continue_extremal",
    "enumerate_extremals_gamma0", "gamma_star", "signature_census",
    "signature_formula", "FlowOptions", "classify_limit", "flow_run", "flow_step",
    "Projector", "random_projector", "retract", "tangent_basis", "SimConfig",
    "compare_sensors", "simulate_error_cov", "SensorProblem", "cost_J", "evaluate",
    "grad_J", "hessian_form", "hessian_matrix",
]
