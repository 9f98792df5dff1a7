"""Writers for the EMB1 embedding container and the manifest skeleton.

These formats are the interface contract with the attribution engine; the
layout is duplicated here (rather than imported) so the extractor has no
code dependency on it:

    magic ``EMB1`` | u32 LE version (=1) | u32 LE dim | u64 LE count |
    64-byte NUL-padded UTF-8 extractor id | u32 LE layer index |
    count x dim float32 LE values, row-major.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import JobError

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ64sI")


def write_embeddings(
    path: str | Path,
    embeddings: np.ndarray,
    extractor_id: str,
    layer_index: int,
) -> None:
    """Write a 2-D float32 array as an EMB1 file."""
    matrix = np.ascontiguousarray(embeddings, dtype=np.float32)
    if matrix.ndim != 2:
        raise JobError(f"embeddings must be 2-D, got shape {matrix.shape}")
    ident = extractor_id.encode("utf-8")
    if len(ident) > 64:
        raise JobError(f"extractor id exceeds 64 bytes: {extractor_id!r}")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        matrix.shape[1],
        matrix.shape[0],
        ident.ljust(64, b"\x00"),
        layer_index,
    )
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(matrix.tobytes())


def write_manifest_skeleton(
    path: str | Path, sample_ids: list[str], audio_paths: list[str]
) -> None:
    """Write a manifest skeleton aligned row-for-row with the EMB1 files.

    ``dataset`` and ``checkpoint`` are filled with the placeholder
    ``"unspecified"`` so the file is loadable as-is; replace them with the
    true labels before attribution. ``audio_path`` is carried as an extra
    key for traceability and is ignored by the engine.
    """
    with open(path, "w", encoding="utf-8") as handle:
        for sample_id, audio_path in zip(sample_ids, audio_paths, strict=True):
            row = {
                "sample_id": sample_id,
                "dataset": "unspecified",
                "checkpoint": "unspecified",
                "audio_path": audio_path,
            }
            handle.write(json.dumps(row, sort_keys=True) + "\n")
