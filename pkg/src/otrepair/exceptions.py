"""Exception hierarchy. Every error raised on purpose by the package derives
from :class:`OTRepairError`, so the CLI can map it to an exit code."""


class OTRepairError(Exception):
    """Base class for package errors."""


class DataValidationError(OTRepairError, ValueError):
    """Input records violate the dataset invariants."""


class DegenerateRangeError(OTRepairError, ValueError):
    """A feature slice has zero range, so no interpolated support exists.

    Drop or jitter constant features before designing a repair.
    """


class EmptyCellError(OTRepairError, ValueError):
    """A (u, s) cell needed for plan design or measurement has no records."""


class MarginalMismatchError(OTRepairError, ValueError):
    """Source and target pmfs do not carry the same total mass."""


class SchemaMismatchError(OTRepairError, ValueError):
    """Data handed to a fitted model does not match its schema fingerprint."""


class ModelFormatError(OTRepairError, ValueError):
    """A serialized model is truncated, corrupted or of the wrong version."""


class OracleSizeError(OTRepairError, ValueError):
    """Instance too large for the dense LP reference solver."""
