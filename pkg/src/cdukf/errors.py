"""Exception taxonomy.

Numerical failures are real outcomes here, not bugs: the benchmark counts
them. Everything a filter run can die of derives from :class:`FilterMathError`
or :class:`IntegrationError` so the run driver can catch one base class and
turn it into a failure record.
"""


class FilterMathError(Exception):
    """Base class for linear-algebra failures inside a filter step."""


class NotPositiveDefinite(FilterMathError):
    """Cholesky factorization hit a nonpositive or non-finite pivot."""


class CholeskyFailureInRhs(NotPositiveDefinite):
    """Covariance factorization failed inside an ODE right-hand side."""


class DowndateNotPD(FilterMathError):
    """Rank-one Cholesky downdate target lost positive definiteness."""


class HyperbolicBreakdown(FilterMathError):
    """A hyperbolic rotation was asked to eliminate a dominant entry."""


class SingularTriangular(FilterMathError):
    """Triangular solve against a factor with a zero diagonal entry."""


class NonFiniteInput(FilterMathError):
    """A kernel received NaN or infinite entries."""


class ResidualCovSingular(FilterMathError):
    """Residual covariance could not be factorized in a measurement update."""


class IntegrationError(Exception):
    """Base class for adaptive ODE solver failures."""


class StepUnderflow(IntegrationError):
    """Step-size controller drove the step below the resolvable size."""


class NonFiniteValues(IntegrationError):
    """An integration stage produced NaN or infinite values."""


class InvalidParams(ValueError):
    """Sigma-point scaling parameters violate n + lambda > 0."""


class ShapeMismatch(ValueError):
    """Array arguments disagree on dimensions."""
