"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


class SolverError(RuntimeError):
    """A numerical solve failed (CG stall, singular factorization, bad bracket)."""

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (relative residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual
