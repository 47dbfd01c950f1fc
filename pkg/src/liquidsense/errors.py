"""Exception hierarchy shared across the package."""


class LiquidSenseError(Exception):
    """Base class for all package errors."""


class DomainError(LiquidSenseError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(LiquidSenseError, ValueError):
    """A configuration object violates one of its invariants."""


class TraceFormatError(LiquidSenseError):
    """Base class for trace file problems. ``code`` identifies the failure."""

    code = "format"


class BadMagicError(TraceFormatError):
    code = "bad-magic"


class UnsupportedVersionError(TraceFormatError):
    code = "bad-version"


class DimensionMismatchError(TraceFormatError):
    code = "dimension-mismatch"


class TruncatedPayloadError(TraceFormatError):
    code = "truncated"


class NonMonotoneTimestampsError(TraceFormatError):
    code = "non-monotone"


class DegenerateInputError(LiquidSenseError, ValueError):
    """Input carries no usable information (e.g. an all-zero matrix)."""


class InsufficientDataError(LiquidSenseError, ValueError):
    pass


class IllPosedError(LiquidSenseError, ValueError):
    pass


class NoPeakError(LiquidSenseError, RuntimeError):
    """No spectral peak cleared the detection threshold."""


class ModelFormatError(LiquidSenseError, ValueError):
    pass


class ModelVersionError(ModelFormatError):
    pass
