"""Exception types shared across the package."""


class WindregimeError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(WindregimeError, ValueError):
    """Invariant or precondition violated (bad shapes, ranges, inputs)."""


class CorruptionError(WindregimeError):
    """On-disk data does not match its manifest (size/content mismatch)."""


class VersionError(WindregimeError):
    """Unsupported file format version."""


class ConfigError(WindregimeError):
    """Malformed or incomplete run configuration."""


class DependencyError(WindregimeError):
    """A pipeline stage artifact required by this stage is missing."""
