class GraphNLSError(Exception):
    """Base class for all package errors."""


class GraphError(GraphNLSError, ValueError):
    """Malformed, disconnected or otherwise invalid graph."""


class QuadratureError(GraphNLSError, ArithmeticError):
    """Tolerance not reached within the evaluation budget, or a NaN was hit."""


class DomainError(QuadratureError):
    """Integrand undefined (negative under a square root) inside the interval."""


class ModelError(GraphNLSError, ArithmeticError):
    """Failure while building a member of the explicit model family."""


class ConstraintError(GraphNLSError, ValueError):
    """Constraint data (mu, eta, delta) violate the required inequalities."""


class HypothesisError(GraphNLSError, ValueError):
    """The graph does not satisfy the hypotheses needed by the minimizer."""


class ConvergenceError(GraphNLSError, ArithmeticError):
    """Iteration budget exhausted or iterate left the admissible set."""


class UnboundedEnergyError(ConvergenceError):
    """Energy decreases without bound along the descent (supercritical mass)."""
