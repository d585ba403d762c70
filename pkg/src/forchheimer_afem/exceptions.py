"""Exception types raised by the solver stack."""


class AfemError(Exception):
    """Base class for all package errors."""


class GeometryError(AfemError, ValueError):
    """Invalid domain description (non-simple polygon, not grid aligned, ...)."""


class UnsupportedDegreeError(AfemError, ValueError):
    pass


class SingularEvaluationError(AfemError, ValueError):
    """A negative-power weight was evaluated at its singular point."""


class SourcePlacementError(AfemError, ValueError):
    """A Dirac source lies outside the domain or on its boundary."""


class IncompatibleDataError(AfemError, ValueError):
    """Dirichlet data disagree at a corner shared by two boundary segments."""


class SingularSystemError(AfemError, RuntimeError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class NonconvergenceError(AfemError, RuntimeError):
    """Picard iteration hit its iteration budget.

    ``history`` holds the Euclidean norms of all coefficient increments.
    """

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


class FitError(AfemError, ValueError):
    pass


class ConfigError(AfemError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
