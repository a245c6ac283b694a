"""Perturbed gradient descent for LQR policy optimization, with
small-disturbance ISS certification along every trajectory."""

__version__ = "0.1.0"

from .backend import BACKEND, is_compiled
from .descent import (
    DescentTrajectory,
    LqrProblem,
    Method,
    PerturbationModel,
    Problem,
    run,
    step,
    step_size,
)
from .linalg import Matrix
from .lqr import Gain, LandscapeCertificate, OptimalSolution, Plant
from .lyapunov import kleinman_newton, solve_dual_lyapunov, solve_lyapunov
from .verify import (
    ComparisonFunction,
    IssReport,
    check_gated_decrease,
    check_v5_decrease,
    check_v6_decrease,
    invariance_check,
    ultimate_bound,
)

__all__ = [
    "BACKEND",
    "ComparisonFunction",
    "DescentTrajectory",
    "Gain",
    "IssReport",
    "LandscapeCertificate",
    "LqrProblem",
    "Matrix",
    "Method",
    "OptimalSolution",
    "PerturbationModel",
    "Plant",
    "Problem",
    "__version__",
    "check_gated_decrease",
    "check_v5_decrease",
    "check_v6_decrease",
    "invariance_check",
    "is_compiled",
    "kleinman_newton",
    "run",
    "solve_dual_lyapunov",
    "solve_lyapunov",
    "step",
    "step_size",
    "ultimate_bound",
]
