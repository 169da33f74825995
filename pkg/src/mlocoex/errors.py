"""Exception types shared across the analytical and simulation engines."""


class ConfigError(ValueError):
    """Raised for malformed or inconsistent scenario configuration."""


class SingularModelError(ValueError):
    """Raised when chain inputs put the closed forms on a singularity (p = 1, X = 1, ...)."""


class InconsistencyError(ValueError):
    """Raised when derived slot-event quantities leave their feasible range.

    Signals that the supplied tau/p values are not a valid operating point of
    the coupled model, e.g. a residual event probability materially below zero
    or a busy-time share outside [0, 1].
    """


class ConvergenceError(RuntimeError):
    """Raised when an iterative solve fails to reach its tolerance.

    Carries the final residual and, for the outer solver, a trace of recent
    residual norms for diagnosis.
    """

    def __init__(self, message, residual=None, trace=None):
        super().__init__(message)
        self.residual = residual
        self.trace = trace or []
