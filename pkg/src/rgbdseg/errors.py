"""Exception types shared across the package."""


class RgbdSegError(Exception):
    """Base class for all rgbdseg errors."""


class DimensionError(RgbdSegError, ValueError):
    """Raster dimensions do not match what the operation requires."""


class FormatError(RgbdSegError, ValueError):
    """A file is unreadable or not in the expected image format."""


class SequenceError(RgbdSegError, RuntimeError):
    """A sequence is empty, inconsistent, or has a missing/corrupt frame."""


class ConfigError(RgbdSegError, ValueError):
    """Invalid configuration value or config-file syntax."""
