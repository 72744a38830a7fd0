"""Exception hierarchy shared by all solver modules."""


class QscoptError(Exception):
    """Base class for all errors raised by this package."""


class NonFinite(QscoptError):
    """An input array contains NaN or Inf entries."""


class SingularSystem(QscoptError):
    """The weighted normal equations are singular along the constraint
    direction (g lies outside the weighted row space of A)."""


class InfeasibleConstraint(QscoptError):
    """The affine constraint set is empty or the normalization hyperplane
    cannot be met inside the null space of N."""


class RankDeficient(QscoptError):
    """The input matrix has rank < 1."""


class OverestimateFailure(QscoptError):
    """Post-processed Lewis weights still fail the overestimate check.
    Indicates a bug, not a bad input."""


class SolverBudgetExceeded(QscoptError):
    """An IRLS loop exceeded its hard linear-solve budget."""


class InvariantViolation(QscoptError):
    """A runtime energy-invariant check failed in verification mode."""


class NoProgress(QscoptError):
    """An outer iteration produced no usable update while the gradient is
    still large; usually a mis-specified C, R or B."""


class SingularHessian(QscoptError):
    """The Newton system is singular and no descent direction exists."""


class ParseError(QscoptError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionMismatch(QscoptError):
    """Loaded data has inconsistent dimensions."""
