"""Exception hierarchy shared across the package."""


class RfContribError(Exception):
    """Base class for all errors raised by this package."""


class DataError(RfContribError):
    """Malformed input data: CSV parsing, label problems, bad split parameters."""


class SchemaError(RfContribError):
    """A persisted model or pattern file does not match the expected schema."""


class ModelConsistencyError(RfContribError):
    """A structural or statistical invariant of a forest does not hold."""


class PatternError(RfContribError):
    """Pattern analysis precondition failure (missing clusters, empty classes)."""


class UsageError(RfContribError):
    """Bad command-line or config-file usage; maps to exit code 2."""
