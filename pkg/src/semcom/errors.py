"""Exception types shared across the package."""


class SemcomError(Exception):
    """Base class for all package errors."""


class UnknownDataset(SemcomError):
    """Requested dataset name is not supported."""


class IngestError(SemcomError):
    """Dataset files are missing or corrupt."""


class RangeError(SemcomError):
    """Pixel values outside the declared range."""


class ConfigError(SemcomError):
    """Invalid configuration value or inconsistent setup."""


class ShapeError(SemcomError):
    """Tensor shape does not match the expected contract."""


class EqualizationError(SemcomError):
    """Estimated channel gain below the usable floor."""


class DegenerateInput(SemcomError):
    """Input has no variance where variance is required."""


class TrainingDiverged(SemcomError):
    """Training loss became non-finite.

    Carries the last finite-loss state dict so callers can recover.
    """

    def __init__(self, message, last_good_state=None):
        super().__init__(message)
        self.last_good_state = last_good_state


class UndefinedMetric(SemcomError):
    """Metric has an empty denominator for the given inputs."""
