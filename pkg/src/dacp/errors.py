"""Exception types shared across the toolkit.

Every error raised on a user-facing path derives from :class:`DacpError`
so callers can catch one base class at the CLI boundary.
"""


class DacpError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(DacpError):
    """Tensor shapes are inconsistent; the message names the layer and dims."""


class ConfigError(DacpError):
    """Bad experiment configuration (unknown key, out-of-range value, ...)."""


class DatasetError(DacpError):
    """Dataset file is missing or malformed; includes the byte offset when known."""


class CheckpointError(DacpError):
    """Base class for checkpoint load failures."""


class CheckpointMagicError(CheckpointError):
    """File does not start with the expected magic bytes."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class CheckpointTruncatedError(CheckpointError):
    """Checkpoint payload ends before the declared layer data."""


class DivergenceError(DacpError):
    """Training produced a non-finite loss or gradient; records where."""
