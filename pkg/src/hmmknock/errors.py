"""Exception types shared across the package."""


class KnockoffError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(KnockoffError, ValueError):
    """A sequence, matrix or index has the wrong length, shape or range."""


class ImpossibleEvidenceError(KnockoffError):
    """The conditioning event has probability zero under the model."""


class SizeError(KnockoffError, ValueError):
    """An exact enumeration or fit would exceed the guarded problem size."""


class ZeroRowError(KnockoffError):
    """A maximum-likelihood count row is empty and no smoothing was requested."""


class FamilyError(KnockoffError, ValueError):
    """The response vector is incompatible with the requested model family."""


class ParseError(KnockoffError):
    """A params or matrix file is malformed.

    Carries the 1-based line number where parsing failed so command-line
    messages can point at the offending line.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
