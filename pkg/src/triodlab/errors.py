"""Exception types raised across the package."""


class TriodLabError(Exception):
    """Base class for every error raised by triodlab."""


class InvalidArgumentError(TriodLabError, ValueError):
    pass


class ConvergenceError(TriodLabError, RuntimeError):
    """An iterative solver ran out of budget.

    ``residual`` carries the last residual norm so callers can decide
    whether the partial result is still usable.
    """

    def __init__(self, message, residual=float("nan"), result=None):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual
        self.result = result


class InstabilityError(TriodLabError, RuntimeError):
    pass


class ScheduleViolationError(TriodLabError, ValueError):
    pass


class GeometryError(TriodLabError, ValueError):
    pass


class DomainError(TriodLabError, ValueError):
    pass


class ExtractionError(TriodLabError, RuntimeError):
    pass


class NoBalanceError(TriodLabError, ValueError):
    pass


class DependencyError(TriodLabError, FileNotFoundError):
    pass


class ConfigError(TriodLabError, ValueError):
    pass
