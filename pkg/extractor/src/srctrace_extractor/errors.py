"""Error types raised by the extraction pipeline."""


class ExtractorError(Exception):
    """Base class for all extraction failures."""


class LayerError(ExtractorError):
    """A requested layer index is outside the model's layer range."""


class AudioDecodeError(ExtractorError):
    """An audio file could not be read or decoded."""


class TruncationMismatchError(ExtractorError):
    """Truncated model hidden states diverged from the full model's."""


class JobError(ExtractorError):
    """The extraction job description is invalid (empty list, bad TSV, ...)."""
