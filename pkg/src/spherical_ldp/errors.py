"""Exception types raised across the package."""


class DegenerateSpectrumError(ValueError):
    """Coincident entries where the exact determinantal path needs distinct ones."""


class PrecisionError(ArithmeticError):
    """Cancellation could not be resolved within the precision budget."""


class ChainStuckError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InvariantViolation(AssertionError):
    """A matrix theorem or conservation law failed on a sample; signals a bug."""


class DensityBoundError(ValueError):
    pass
