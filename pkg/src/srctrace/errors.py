"""Exception hierarchy shared by all srctrace modules."""


class SourceTracingError(Exception):
    """Base class for every error raised by this package."""


class FormatError(SourceTracingError):
    """Embedding file has a bad magic number, version, or layout."""


class TruncationError(SourceTracingError):
    """Embedding file payload is shorter than the header promises."""


class DataError(SourceTracingError):
    """Numeric payload violates an invariant (NaN/Inf, empty input)."""


class DuplicateError(SourceTracingError):
    """A manifest contains the same sample_id more than once."""


class SchemaError(SourceTracingError):
    """A manifest line is not valid JSON or lacks a required field."""


class AlignmentError(SourceTracingError):
    """Records and embedding rows (or truth/prediction arrays) differ in length."""


class LabelError(SourceTracingError):
    """Samples lack a value for the requested attribution target."""

    def __init__(self, message, sample_ids=()):
        super().__init__(message)
        self.sample_ids = tuple(sample_ids)


class EmptySupportError(SourceTracingError):
    """An index was requested over zero support rows."""


class DimError(SourceTracingError):
    """Query dimensionality does not match the index."""


class RangeError(SourceTracingError):
    """A numeric parameter (k, n, ...) is outside its valid range."""


class StratumError(SourceTracingError):
    """A stratum (class, dataset, or group) is too small for the requested split."""


class CalibrationError(SourceTracingError):
    """OOD calibration received an empty score list."""


class CoverageError(SourceTracingError):
    """Sweep cells do not share the same seed multiset, or an input file is missing."""
