"""One-shot batch extraction of mean-pooled hidden states into EMB1 files."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import load_waveform
from .emb import write_embeddings, write_manifest_skeleton
from .errors import AudioDecodeError, JobError, LayerError
from .model import DEFAULT_LAYER, DEFAULT_MODEL, FrozenEncoder, load_encoder, truncate_model


@dataclass
class ExtractionJob:
    """Everything needed to turn an audio list into EMB1 files."""

    audio: list[tuple[str, str]]  # (sample_id, path) pairs, order preserved
    out_dir: Path
    model_id: str = DEFAULT_MODEL
    layers: tuple[int, ...] = (DEFAULT_LAYER,)
    batch_size: int = 8
    device: str = "cpu"
    max_seconds: float = 90.0  # above this, chunk-pool instead of one pass
    chunk_seconds: float = 30.0


@dataclass
class ExtractionResult:
    sample_ids: list[str]
    emb_paths: dict[int, Path]
    manifest_path: Path
    rejects_path: Path
    rejects: list[tuple[str, str, str]] = field(default_factory=list)
    dim: int = 0


def mean_pool(frames: np.ndarray) -> np.ndarray:
    """Average [frames, dim] over time; float64 accumulation, float32 out.

    If every frame equals a vector v, the result is exactly v.
    """
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise JobError(f"cannot pool hidden states of shape {frames.shape}")
    return frames.mean(axis=0, dtype=np.float64).astype(np.float32)


def pool_chunks(sums: list[np.ndarray], counts: list[int]) -> np.ndarray:
    """Combine per-chunk float64 frame sums into one frame-weighted mean."""
    total = sum(counts)
    if total == 0:
        raise JobError("no frames to pool")
    stacked = np.sum(np.stack(sums, axis=0), axis=0)
    return (stacked / float(total)).astype(np.float32)


def read_audio_list(path: str | Path) -> list[tuple[str, str]]:
    """Read a TSV of ``sample_id<TAB>audio_path`` rows."""
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise JobError(f"{path} line {number}: expected sample_id<TAB>path")
            if parts[0] in seen:
                raise JobError(f"{path} line {number}: duplicate sample_id {parts[0]!r}")
            seen.add(parts[0])
            entries.append((parts[0], parts[1]))
    if not entries:
        raise JobError(f"{path}: audio list is empty")
    return entries


def model_tag(model_id: str) -> str:
    """Filesystem-safe short name for a model id or local path."""
    tag = model_id.rstrip("/").rsplit("/", 1)[-1]
    return re.sub(r"[^A-Za-z0-9._-]", "_", tag) or "model"


def _probe_waves(rate: int) -> list[np.ndarray]:
    t = np.arange(rate, dtype=np.float32) / rate
    return [0.5 * np.sin(2.0 * np.pi * 220.0 * t)]


def _split_chunks(wave: np.ndarray, rate: int, chunk_seconds: float) -> list[np.ndarray]:
    step = max(int(round(chunk_seconds * rate)), rate)
    chunks = [wave[i : i + step] for i in range(0, len(wave), step)]
    # Fold a sub-second tail into the previous chunk: too short to encode.
    if len(chunks) > 1 and len(chunks[-1]) < rate:
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks


def run(job: ExtractionJob) -> ExtractionResult:
    """Execute the job; see the CLI for the file layout produced."""
    if job.batch_size < 1:
        raise JobError(f"batch_size must be >= 1, got {job.batch_size}")
    if not job.audio:
        raise JobError("audio list is empty")
    layers = tuple(sorted(set(int(l) for l in job.layers)))
    if not layers:
        raise JobError("no layers requested")

    encoder = load_encoder(job.model_id, device=job.device)
    for layer in layers:
        if not 0 <= layer <= encoder.num_layers:
            raise LayerError(
                f"layer {layer} out of range 0..{encoder.num_layers} "
                f"for {job.model_id}"
            )
    if layers[-1] < encoder.num_layers:
        truncate_model(encoder, layers[-1], probe=_probe_waves(encoder.sampling_rate))

    rate = encoder.sampling_rate
    max_samples = int(job.max_seconds * rate)

    kept_ids: list[str] = []
    kept_paths: list[str] = []
    rejects: list[tuple[str, str, str]] = []
    pooled: dict[int, list[np.ndarray]] = {layer: [] for layer in layers}

    buffer: list[tuple[str, str, np.ndarray]] = []

    def flush() -> None:
        if not buffer:
            return
        batch_states = encoder.encode([wave for _, _, wave in buffer])
        for (sample_id, path, _), states in zip(buffer, batch_states, strict=True):
            kept_ids.append(sample_id)
            kept_paths.append(path)
            for layer in layers:
                pooled[layer].append(mean_pool(states[layer]))
        buffer.clear()

    for sample_id, path in job.audio:
        try:
            wave = load_waveform(path, rate)
        except AudioDecodeError as exc:
            rejects.append((sample_id, path, str(exc)))
            continue
        if len(wave) > max_samples:
            flush()  # keep output rows in input order
            sums = {layer: [] for layer in layers}
            counts: list[int] = []
            for chunk in _split_chunks(wave, rate, job.chunk_seconds):
                states = encoder.encode([chunk])[0]
                counts.append(states[layers[0]].shape[0])
                for layer in layers:
                    sums[layer].append(states[layer].sum(axis=0, dtype=np.float64))
            kept_ids.append(sample_id)
            kept_paths.append(path)
            for layer in layers:
                pooled[layer].append(pool_chunks(sums[layer], counts))
        else:
            buffer.append((sample_id, path, wave))
            if len(buffer) >= job.batch_size:
                flush()
    flush()

    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = model_tag(job.model_id)
    emb_paths: dict[int, Path] = {}
    dim = encoder.hidden_size
    for layer in layers:
        matrix = (
            np.stack(pooled[layer], axis=0)
            if pooled[layer]
            else np.empty((0, dim), dtype=np.float32)
        )
        emb_path = out_dir / f"{tag}_{layer}.emb"
        write_embeddings(emb_path, matrix, extractor_id=tag, layer_index=layer)
        emb_paths[layer] = emb_path

    manifest_path = out_dir / "manifest.skeleton.jsonl"
    write_manifest_skeleton(manifest_path, kept_ids, kept_paths)

    rejects_path = out_dir / "rejects.tsv"
    with open(rejects_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["sample_id", "audio_path", "error"])
        writer.writerows(rejects)

    return ExtractionResult(
        sample_ids=kept_ids,
        emb_paths=emb_paths,
        manifest_path=manifest_path,
        rejects_path=rejects_path,
        rejects=rejects,
        dim=dim,
    )
