"""Shared fixtures: a tiny locally saved encoder and synthetic WAV files.

The hub-hosted production weights are large and may be unreachable, so
tests exercise a small randomly initialized model of the same architecture
saved to disk; determinism, container compliance, pooling behavior and
truncation equality do not depend on the weight values.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import torch
from scipy.io import wavfile
from transformers import (
    SeamlessM4TFeatureExtractor,
    Wav2Vec2BertConfig,
    Wav2Vec2BertModel,
)

RATE = 16000
TINY_LAYERS = 3
TINY_HIDDEN = 32


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    out = tmp_path_factory.mktemp("tiny-encoder")
    torch.manual_seed(0)
    config = Wav2Vec2BertConfig(
        hidden_size=TINY_HIDDEN,
        num_hidden_layers=TINY_LAYERS,
        num_attention_heads=2,
        intermediate_size=64,
        feature_projection_input_dim=160,
        output_hidden_size=TINY_HIDDEN,
    )
    Wav2Vec2BertModel(config).save_pretrained(out)
    SeamlessM4TFeatureExtractor(
        feature_size=80, num_mel_bins=80, sampling_rate=RATE
    ).save_pretrained(out)
    return str(out)


def write_wav(
    path: Path,
    seconds: float,
    freq: float = 440.0,
    rate: int = RATE,
    stereo: bool = False,
) -> Path:
    t = np.arange(int(seconds * rate), dtype=np.float64) / rate
    wave = 0.4 * np.sin(2.0 * np.pi * freq * t) + 0.1 * np.sin(2.0 * np.pi * 3.1 * freq * t)
    pcm = np.clip(wave * 32767.0, -32768, 32767).astype(np.int16)
    if stereo:
        pcm = np.stack([pcm, (pcm // 2)], axis=1)
    wavfile.write(str(path), rate, pcm)
    return path


@pytest.fixture()
def wav_set(tmp_path) -> list[tuple[str, str]]:
    """Five decodable synthetic files with varied rate/length/channels."""
    specs = [
        ("a", dict(seconds=1.0, freq=220.0)),
        ("b", dict(seconds=1.5, freq=440.0)),
        ("c", dict(seconds=0.7, freq=880.0)),
        ("d", dict(seconds=1.2, freq=330.0, rate=8000)),
        ("e", dict(seconds=1.0, freq=550.0, stereo=True)),
    ]
    entries = []
    for name, kwargs in specs:
        path = write_wav(tmp_path / f"{name}.wav", **kwargs)
        entries.append((name, str(path)))
    return entries


def write_audio_list(path: Path, entries: list[tuple[str, str]]) -> Path:
    path.write_text(
        "".join(f"{sid}\t{p}\n" for sid, p in entries), encoding="utf-8"
    )
    return path
