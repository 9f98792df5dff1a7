"""Frozen pretrained speech encoder: loading, inference, layer truncation."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import torch
from transformers import AutoFeatureExtractor, AutoModel

from .errors import ExtractorError, LayerError, TruncationMismatchError

DEFAULT_MODEL = "facebook/w2v-bert-2.0"
DEFAULT_LAYER = 4


class FrozenEncoder:
    """A pretrained speech model held in inference mode, gradients off.

    ``encode`` maps waveforms to per-layer frame sequences; index 0 of the
    returned hidden-state list is the feature-encoder output and index L
    the output of transformer layer L.
    """

    def __init__(self, model_id: str, device: str = "cpu"):
        self.model_id = model_id
        self.device = torch.device(device)
        try:
            self.feature_extractor = AutoFeatureExtractor.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:  # transformers raises a zoo of types here
            raise ExtractorError(f"cannot load model {model_id!r}: {exc}") from exc
        self.model.to(self.device)
        self.model.eval()
        self.model.requires_grad_(False)
        if not hasattr(self.model, "encoder") or not hasattr(self.model.encoder, "layers"):
            raise ExtractorError(
                f"model {model_id!r} has no encoder.layers stack; unsupported architecture"
            )
        self.num_layers = len(self.model.encoder.layers)
        self.hidden_size = int(self.model.config.hidden_size)
        self.sampling_rate = int(self.feature_extractor.sampling_rate)

    def encode(self, waves: Sequence[np.ndarray]) -> list[list[np.ndarray]]:
        """Return, per waveform, all hidden states as [frames, dim] float32.

        Waveforms whose processor emits frame-aligned features run as one
        padded batch with the padding frames dropped afterwards; otherwise
        each waveform runs on its own.
        """
        inputs = self.feature_extractor(
            [np.asarray(w, dtype=np.float32) for w in waves],
            sampling_rate=self.sampling_rate,
            return_tensors="pt",
            padding=True,
            return_attention_mask=True,
        )
        mask = inputs.get("attention_mask")
        frame_aligned = "input_features" in inputs and mask is not None
        if not frame_aligned and len(waves) > 1:
            out: list[list[np.ndarray]] = []
            for wave in waves:
                out.extend(self.encode([wave]))
            return out
        with torch.no_grad():
            result = self.model(
                **{k: v.to(self.device) for k, v in inputs.items()},
                output_hidden_states=True,
            )
        states = [h.cpu().numpy().astype(np.float32) for h in result.hidden_states]
        batch = []
        for b in range(states[0].shape[0]):
            frames = int(mask[b].sum()) if frame_aligned else states[0].shape[1]
            batch.append([layer[b, :frames] for layer in states])
        return batch


def load_encoder(model_id: str = DEFAULT_MODEL, device: str = "cpu") -> FrozenEncoder:
    return FrozenEncoder(model_id, device=device)


def truncate_model(
    encoder: FrozenEncoder,
    max_layer: int,
    probe: Sequence[np.ndarray] | None = None,
    rtol: float = 1e-5,
) -> FrozenEncoder:
    """Drop all transformer layers above ``max_layer``, in place.

    With ``probe`` waveforms given, the surviving hidden states are checked
    against the full model's on that batch before the cut is accepted;
    divergence beyond ``rtol`` aborts. ``max_layer`` 0 keeps only the
    feature encoder.
    """
    if not 0 <= max_layer <= encoder.num_layers:
        raise LayerError(
            f"max_layer {max_layer} out of range 0..{encoder.num_layers}"
        )
    reference = encoder.encode(probe) if probe is not None else None
    encoder.model.encoder.layers = encoder.model.encoder.layers[:max_layer]
    encoder.model.config.num_hidden_layers = max_layer
    encoder.num_layers = max_layer
    if reference is not None:
        reduced = encoder.encode(probe)
        for full_states, cut_states in zip(reference, reduced, strict=True):
            for layer in range(max_layer + 1):
                full, cut = full_states[layer], cut_states[layer]
                if cut.shape != full.shape or not np.allclose(
                    cut, full, rtol=rtol, atol=1e-6
                ):
                    raise TruncationMismatchError(
                        f"layer {layer} diverged after truncation to {max_layer}"
                    )
    return encoder
