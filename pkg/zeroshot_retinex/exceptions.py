class EnhancerError(Exception):
    """Base class for every error raised by the enhancer"""


class ShapeError(EnhancerError, ValueError):
    """Operand shapes are incompatible with an operation"""


class ConfigError(EnhancerError, ValueError):
    """A configuration value is missing, malformed or out of range"""


class TapeError(EnhancerError):
    """The differentiation tape was used outside its contract"""


class ImageReadError(EnhancerError):
    """An image could not be decoded"""


class ImageNotFoundError(ImageReadError):
    pass


class UnsupportedImageError(ImageReadError):
    pass


class EmptyImageError(ImageReadError):
    pass


class ImageWriteError(EnhancerError):
    pass


class OptimizationError(EnhancerError):
    pass


class MissingGradientError(OptimizationError):
    pass


class DivergenceError(OptimizationError):
    """The loss became non-finite during optimization"""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"Non-finite loss at iteration {iteration}")
