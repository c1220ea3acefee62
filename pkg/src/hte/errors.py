"""Exception hierarchy shared across the package."""


class HteError(Exception):
    """Base class for all package errors."""


class ConfigError(HteError, ValueError):
    """Invalid configuration (bad field, unknown key, inconsistent values)."""


class DataError(HteError, ValueError):
    """Invalid or unusable input data (parse failures, degenerate datasets)."""


class TrainingError(HteError, RuntimeError):
    """Failure while fitting a model."""


class IllConditionedError(TrainingError):
    """A symmetric solve failed even after maximal jitter escalation."""
