"""Exception types shared across the package."""


class GradFeatError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GradFeatError, ValueError):
    """Operand shapes do not agree."""


class FormatError(GradFeatError):
    """A binary or text file could not be parsed.

    ``offset`` is the byte position where the problem was detected, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class ChainViolationError(FormatError):
    """Consecutive layers do not agree on their shared dimension."""

    def __init__(self, message, layer, next_layer, offset=None):
        super().__init__(message, offset)
        self.layer = layer
        self.next_layer = next_layer


class ConvergenceError(GradFeatError):
    """The SVM solver hit its iteration budget before meeting its tolerance."""

    def __init__(self, message, gap):
        super().__init__(f"{message}; final duality gap {gap:.3e}")
        self.reason = message
        self.gap = gap


class FingerprintMismatchError(GradFeatError):
    pass
