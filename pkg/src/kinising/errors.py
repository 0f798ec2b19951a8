"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid argument: bad dimension, out-of-range index or probability."""


class NumericalError(ArithmeticError):
    """A linear solve could not be repaired (e.g. a singular Fisher matrix)."""

    def __init__(self, message, spin=None):
        super().__init__(message)
        self.spin = spin


class EmptyAverageError(ParameterError):
    """An average over update times was requested for a spin never updated."""


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
