"""Continuous-discrete unscented Kalman filtering toolkit.

Fourteen filter variants (conventional, pseudo-square-root and true
square-root measurement updates, each over a moment-ODE or sigma-node-ODE
time update) behind one interface, plus the ill-conditioned coordinated-turn
benchmark harness that stress-tests them.
"""

from .errors import (
    CholeskyFailureInRhs,
    DowndateNotPD,
    FilterMathError,
    HyperbolicBreakdown,
    IntegrationError,
    InvalidParams,
    NonFiniteInput,
    NonFiniteValues,
    NotPositiveDefinite,
    ResidualCovSingular,
    ShapeMismatch,
    SingularTriangular,
    StepUnderflow,
)

__version__ = "0.1.0"

__all__ = [
    "CholeskyFailureInRhs",
    "DowndateNotPD",
    "FilterMathError",
    "HyperbolicBreakdown",
    "IntegrationError",
    "InvalidParams",
    "NonFiniteInput",
    "NonFiniteValues",
    "NotPositiveDefinite",
    "ResidualCovSingular",
    "ShapeMismatch",
    "SingularTriangular",
    "StepUnderflow",
    "__version__",
]
