"""Exception hierarchy shared by all modules."""


class ArtifactError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ArtifactError):
    """Invalid potential family, parameters or experiment configuration."""


class DimensionError(ArtifactError, ValueError):
    pass


class NumericalError(ArtifactError):
    """Failure of a numerical stage; the CLI maps these to exit code 3."""


class SingularityError(NumericalError):
    pass


class ThresholdProximityError(SingularityError):
    """I + T(lambda) is too close to singular to invert reliably."""

    def __init__(self, message, smallest_singular_value):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class SingularBlockError(SingularityError):
    def __init__(self, block):
        super().__init__(f"block {block} is numerically singular")
        self.block = block


class TuningError(NumericalError):
    pass


class FitError(NumericalError):
    pass


class ClassificationError(NumericalError):
    """Internal inconsistency in the zero-energy analysis."""


class WindowError(NumericalError):
    pass
