"""Exception types shared across the toolkit."""


class StereoDistError(Exception):
    """Base class for all toolkit errors."""


class InputValidationError(StereoDistError, ValueError):
    pass


class StructuralError(StereoDistError, ValueError):
    """Array shapes disagree with each other or with a declared size."""


class DegenerateInputError(StereoDistError, ValueError):
    """Input is well-formed but the quantity is undefined (empty mask, single hypothesis, ...)."""


class FormatError(StereoDistError, ValueError):
    """A file or byte buffer does not follow the expected layout."""


class RangeError(StereoDistError, ValueError):
    pass


class ResampleSignal(StereoDistError):
    """The sampled point sits too close to a non-differentiable set."""


class DivergenceError(StereoDistError, ArithmeticError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"loss became non-finite at step {step}")
