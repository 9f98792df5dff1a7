"""Batch extraction of mean-pooled speech SSL hidden states into EMB1 files."""

from .audio import load_waveform
from .emb import write_embeddings, write_manifest_skeleton
from .errors import (
    AudioDecodeError,
    ExtractorError,
    JobError,
    LayerError,
    TruncationMismatchError,
)
from .extract import (
    ExtractionJob,
    ExtractionResult,
    mean_pool,
    model_tag,
    pool_chunks,
    read_audio_list,
    run,
)
from .model import DEFAULT_LAYER, DEFAULT_MODEL, FrozenEncoder, load_encoder, truncate_model

__version__ = "0.1.0"

__all__ = [
    "AudioDecodeError",
    "DEFAULT_LAYER",
    "DEFAULT_MODEL",
    "ExtractionJob",
    "ExtractionResult",
    "ExtractorError",
    "FrozenEncoder",
    "JobError",
    "LayerError",
    "TruncationMismatchError",
    "load_encoder",
    "load_waveform",
    "mean_pool",
    "model_tag",
    "pool_chunks",
    "read_audio_list",
    "run",
    "truncate_model",
    "write_embeddings",
    "write_manifest_skeleton",
]
