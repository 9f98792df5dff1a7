"""On-disk embedding / manifest formats and the in-memory corpus.

Embeddings live in a small binary container ("EMB1"): a fixed header
followed by a row-major float32 matrix. Sample metadata lives in a
JSON-Lines manifest joined to the matrix by row position. One embedding
file exists per (extractor, layer); manifests are stable across layers.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    AlignmentError,
    DataError,
    DuplicateError,
    FormatError,
    LabelError,
    SchemaError,
    TruncationError,
)

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ64sI")  # magic, version, dim, count, extractor_id, layer
HEADER_SIZE = _HEADER.size

_REQUIRED_FIELDS = ("sample_id", "dataset", "checkpoint")
_OPTIONAL_FIELDS = ("acoustic_model", "vocoder", "speaker", "language")
MANIFEST_FIELDS = _REQUIRED_FIELDS + _OPTIONAL_FIELDS


@dataclass(frozen=True)
class SampleRecord:
    """Labels for one generated-audio sample. Optional fields are None when
    the source metadata does not provide them (never empty strings)."""

    sample_id: str
    dataset: str
    checkpoint: str
    acoustic_model: Optional[str] = None
    vocoder: Optional[str] = None
    speaker: Optional[str] = None
    language: Optional[str] = None

    def get(self, field_name: str) -> Optional[str]:
        if field_name not in MANIFEST_FIELDS:
            raise KeyError(f"unknown record field: {field_name!r}")
        return getattr(self, field_name)


@dataclass(frozen=True)
class EmbeddingSet:
    """A count x dim float32 matrix of mean-pooled features from one
    extractor layer."""

    extractor_id: str
    layer_index: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float32)
        if mat.ndim != 2:
            raise DataError(f"embedding matrix must be 2-D, got shape {mat.shape}")
        object.__setattr__(self, "matrix", mat)
        if self.layer_index < 0:
            raise DataError(f"layer_index must be >= 0, got {self.layer_index}")
        if mat.shape[1] <= 0:
            raise DataError("embedding dim must be > 0")
        bad = _first_nonfinite_row(mat)
        if bad is not None:
            raise DataError(f"non-finite value in embedding row {bad}")

    @property
    def count(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


def _first_nonfinite_row(matrix: np.ndarray) -> Optional[int]:
    if matrix.size == 0:
        return None
    finite = np.isfinite(matrix).all(axis=1)
    if finite.all():
        return None
    return int(np.flatnonzero(~finite)[0])


def write_embeddings(emb_set: EmbeddingSet, path: Union[str, Path]) -> None:
    """Write an EmbeddingSet to `path` in the EMB1 container format."""
    extractor_bytes = emb_set.extractor_id.encode("utf-8")
    if len(extractor_bytes) > 64:
        raise FormatError(
            f"extractor_id exceeds 64 UTF-8 bytes: {emb_set.extractor_id!r}"
        )
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        emb_set.dim,
        emb_set.count,
        extractor_bytes.ljust(64, b"\x00"),
        emb_set.layer_index,
    )
    payload = np.ascontiguousarray(emb_set.matrix, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_embeddings(path: Union[str, Path]) -> EmbeddingSet:
    """Load and validate an EMB1 file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise TruncationError(
            f"{path}: file shorter than the {HEADER_SIZE}-byte header"
        )
    magic, version, dim, count, extractor_raw, layer = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic bytes {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise FormatError(f"{path}: header declares dim=0")
    expected = count * dim * 4
    payload = raw[HEADER_SIZE:]
    if len(payload) < expected:
        raise TruncationError(
            f"{path}: payload has {len(payload)} bytes, header promises {expected}"
        )
    if len(payload) > expected:
        raise FormatError(
            f"{path}: {len(payload) - expected} trailing bytes after payload"
        )
    matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()
    bad = _first_nonfinite_row(matrix)
    if bad is not None:
        raise DataError(f"{path}: non-finite value in row {bad}")
    extractor_id = extractor_raw.rstrip(b"\x00").decode("utf-8")
    return EmbeddingSet(extractor_id=extractor_id, layer_index=layer, matrix=matrix)


def load_manifest(path: Union[str, Path]) -> list[SampleRecord]:
    """Read a JSON-Lines manifest into SampleRecords, preserving file order."""
    records: list[SampleRecord] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise SchemaError(f"line {lineno}: expected a JSON object")
            kwargs = {}
            for name in _REQUIRED_FIELDS:
                value = obj.get(name)
                if not isinstance(value, str) or not value:
                    raise SchemaError(
                        f"line {lineno}: missing or empty required field {name!r}"
                    )
                kwargs[name] = value
            for name in _OPTIONAL_FIELDS:
                value = obj.get(name)
                # absent or empty optional values become an explicit None
                kwargs[name] = value if isinstance(value, str) and value else None
            sample_id = kwargs["sample_id"]
            if sample_id in seen:
                raise DuplicateError(
                    f"line {lineno}: duplicate sample_id {sample_id!r} "
                    f"(first seen on line {seen[sample_id]})"
                )
            seen[sample_id] = lineno
            records.append(SampleRecord(**kwargs))
    return records


def write_manifest(records: Sequence[SampleRecord], path: Union[str, Path]) -> None:
    """Write records as JSON-Lines; None fields are omitted."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {k: rec.get(k) for k in MANIFEST_FIELDS if rec.get(k) is not None}
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


@dataclass(frozen=True)
class Corpus:
    """Records joined positionally with embeddings, plus class labels for one
    attribution target. Immutable once built; safe to share across threads."""

    records: tuple[SampleRecord, ...]
    embeddings: EmbeddingSet
    target: str
    class_names: tuple[str, ...]
    labels: np.ndarray = field(repr=False)  # int32, aligned with records

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def sample_ids(self) -> tuple[str, ...]:
        return tuple(r.sample_id for r in self.records)


TargetSpec = Union[str, Mapping[str, str]]


def build_corpus(
    records: Sequence[SampleRecord],
    emb_set: EmbeddingSet,
    target: TargetSpec = "checkpoint",
) -> Corpus:
    """Join records with embeddings and derive class indices for `target`.

    `target` is either a record field name or a relabel map applied to the
    checkpoint field (keys are checkpoint labels, values the merged class
    names). Class indices are assigned lexicographically over the distinct
    label strings so reports reproduce across runs.
    """
    if len(records) != emb_set.count:
        raise AlignmentError(
            f"{len(records)} records but {emb_set.count} embedding rows"
        )
    if isinstance(target, Mapping):
        values = [target.get(r.checkpoint) for r in records]
        target_name = "relabel"
    else:
        values = [r.get(target) for r in records]
        target_name = target
    missing = [r.sample_id for r, v in zip(records, values) if v is None]
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise LabelError(
            f"{len(missing)} samples have no value for target "
            f"{target_name!r}: {shown}{more}",
            sample_ids=missing,
        )
    class_names = tuple(sorted(set(values)))
    index_of = {name: i for i, name in enumerate(class_names)}
    labels = np.fromiter((index_of[v] for v in values), dtype=np.int32, count=len(values))
    labels.flags.writeable = False
    return Corpus(
        records=tuple(records),
        embeddings=emb_set,
        target=target_name,
        class_names=class_names,
        labels=labels,
    )
