"""Exception types shared across the package."""


class QSelfTestError(Exception):
    """Base class for all package errors."""


class DimensionError(QSelfTestError, ValueError):
    """A dimension, layout, or target index does not fit."""


class ValidationError(QSelfTestError, ValueError):
    """A structural invariant was violated."""


class DeviceValidationError(ValidationError):
    """A device definition violates a device invariant."""


class CircuitValidationError(ValidationError):
    """A circuit definition violates a circuit invariant."""


class ConfigError(QSelfTestError, ValueError):
    """Bad run configuration (CLI flags, file paths, modes)."""
