"""Audio loading: WAV decoding, mono mixdown, resampling to the model rate."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import AudioDecodeError

_PCM_SCALE = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
    np.dtype(np.uint8): 128.0,
}


def load_waveform(path: str | Path, target_rate: int) -> np.ndarray:
    """Read a WAV file as a mono float32 waveform at ``target_rate`` Hz.

    Integer PCM is scaled to [-1, 1]; multi-channel audio is averaged to
    mono; rate conversion uses polyphase resampling. Any read or decode
    failure raises :class:`AudioDecodeError`.
    """
    try:
        rate, data = wavfile.read(str(path))
    except (OSError, ValueError) as exc:
        raise AudioDecodeError(f"{path}: {exc}") from exc
    if data.size == 0:
        raise AudioDecodeError(f"{path}: empty audio stream")
    if data.dtype in _PCM_SCALE:
        offset = 128.0 if data.dtype == np.uint8 else 0.0
        wave = (data.astype(np.float32) - offset) / _PCM_SCALE[data.dtype]
    else:
        wave = data.astype(np.float32)
    if wave.ndim == 2:
        wave = wave.mean(axis=1)
    elif wave.ndim != 1:
        raise AudioDecodeError(f"{path}: unsupported shape {data.shape}")
    if not np.isfinite(wave).all():
        raise AudioDecodeError(f"{path}: non-finite samples")
    if rate != target_rate:
        ratio = Fraction(target_rate, rate)
        wave = resample_poly(wave.astype(np.float64), ratio.numerator, ratio.denominator)
        wave = wave.astype(np.float32)
    return np.ascontiguousarray(wave)
