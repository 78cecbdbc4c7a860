"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value (bad alpha, probability, layer sizes, ...)."""


class ShapeError(ValueError):
    """Tensor shapes incompatible for the requested operation."""


class DataFormatError(ValueError):
    """Dataset file is malformed or violates an invariant; message carries position."""
