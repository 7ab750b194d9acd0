"""Exception hierarchy shared by all modules."""


class LlrDetectError(Exception):
    """Base class for every error raised by the package."""


class StructuralError(LlrDetectError, ValueError):
    """Inconsistent shapes or malformed inputs."""


class DeviationTooLargeError(LlrDetectError, ValueError):
    """A composed model has lost positive semidefinite noise covariances."""


class DomainError(LlrDetectError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class NumericalError(LlrDetectError, ArithmeticError):
    """A numerical routine failed (non-convergence, ill-conditioning)."""


class ConditioningError(NumericalError):
    """A linear system is too close to singular to be trusted."""


class NotPositiveDefiniteError(NumericalError):
    """A matrix required to be positive definite is not."""


class LinearizationError(NumericalError):
    """Weights push the linearized covariance outside the PD cone."""


class ModelFileError(LlrDetectError, ValueError):
    """A model-definition document could not be parsed.

    ``field`` is a dotted path such as ``deviations[1].dA`` and ``line`` the
    1-based source line, when known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
