"""Exception hierarchy shared across the package."""


class ForecastError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(ForecastError):
    """Array shapes do not conform."""


class ConfigError(ForecastError):
    """Invalid configuration value."""


class DataError(ForecastError):
    """Bad, missing, or inconsistent data."""


class IngestError(DataError):
    """Input file could not be parsed or violates the expected schema."""


class GraphError(ForecastError):
    """Invalid feature graph or reference to an unknown node."""


class UsageError(ForecastError):
    """API misuse: wrong layout, missing forward cache, and the like."""


class NumericError(ForecastError):
    """Non-finite values where finite ones are required."""


class DomainError(ForecastError):
    """Input outside the mathematical domain of an operation."""


class DivergenceError(NumericError):
    """Training loss became non-finite."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
