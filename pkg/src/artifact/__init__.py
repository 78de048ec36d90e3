"""Zero-energy threshold analysis and dispersive decay experiments for radial
Schroedinger operators H = -Laplace + V in three dimensions."""

__version__ = "0.1.0"

from .errors import (ArtifactError, ConfigError, DimensionError, NumericalError,
                     SingularityError, ThresholdProximityError)
from .potential import PotentialSpec, factorize, sample
from .resolvent import RadialGrid
from .threshold import Kind, ThresholdReport, analyze, tune_coupling

__all__ = [
    "ArtifactError", "ConfigError", "DimensionError", "NumericalError", "SingularityError",
    "ThresholdProximityError", "PotentialSpec", "factorize", "sample", "RadialGrid", "Kind",
    "ThresholdReport", "analyze", "tune_coupling",
]
