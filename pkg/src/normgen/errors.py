"""Exception types shared across the package."""


class NormgenError(Exception):
    """Base class for all package-specific errors."""


class MalformedImageError(NormgenError):
    """Image does not have the expected channel layout or dtype."""


class EmptyForegroundError(NormgenError):
    """Operation requires at least one foreground pixel."""


class EmptySketchError(NormgenError):
    """Contour extraction found no foreground to trace."""


class InvalidThresholdError(NormgenError):
    """Curvature band thresholds are not ordered t_hi > t_lo."""


class InvalidProbabilityError(NormgenError):
    """Keep probability outside (0, 1]."""


class OutOfFrameError(NormgenError):
    """Shape does not fit inside the image with the required margin."""


class ShapeMismatchError(NormgenError):
    """Tensor shapes disagree where they must match."""


class ConfigurationError(NormgenError):
    """Invalid network or training configuration."""


class DatasetError(NormgenError):
    """Dataset build or load failure; message names the offending path/id."""


class UndefinedMetricError(NormgenError):
    """Metric requested over an empty foreground set."""


class NonFiniteLossError(NormgenError):
    """Training produced a NaN/Inf loss; message names the batch ids."""
