import numpy as np
import pytest

from srctrace_extractor import (
    LayerError,
    load_encoder,
    truncate_model,
)

from conftest import RATE, TINY_HIDDEN, TINY_LAYERS


def _probe():
    t = np.arange(RATE, dtype=np.float32) / RATE
    return [
        0.3 * np.sin(2.0 * np.pi * 150.0 * t),
        0.2 * np.sin(2.0 * np.pi * 410.0 * t[: RATE // 2]),
    ]


def test_encode_shapes_and_layer_count(tiny_model_dir):
    enc = load_encoder(tiny_model_dir)
    assert enc.num_layers == TINY_LAYERS
    assert enc.hidden_size == TINY_HIDDEN
    states = enc.encode(_probe())
    assert len(states) == 2
    for per_wave in states:
        assert len(per_wave) == TINY_LAYERS + 1
        for layer_states in per_wave:
            assert layer_states.ndim == 2
            assert layer_states.shape[1] == TINY_HIDDEN
            assert np.isfinite(layer_states).all()
    # the half-length waveform has fewer frames than the full-length one
    assert states[1][0].shape[0] < states[0][0].shape[0]


def test_truncated_states_match_full_model(tiny_model_dir):
    probe = _probe()
    full = load_encoder(tiny_model_dir)
    reference = full.encode(probe)
    cut_to = TINY_LAYERS - 1
    truncated = truncate_model(load_encoder(tiny_model_dir), cut_to, probe=probe)
    assert truncated.num_layers == cut_to
    reduced = truncated.encode(probe)
    for ref_wave, red_wave in zip(reference, reduced, strict=True):
        assert len(red_wave) == cut_to + 1
        for layer in range(cut_to + 1):
            np.testing.assert_allclose(
                red_wave[layer], ref_wave[layer], rtol=1e-5, atol=1e-6
            )


def test_truncate_to_zero_keeps_feature_encoder_output(tiny_model_dir):
    probe = _probe()
    enc = truncate_model(load_encoder(tiny_model_dir), 0, probe=probe)
    states = enc.encode(probe)
    for per_wave in states:
        assert len(per_wave) == 1


@pytest.mark.parametrize("bad", [-1, TINY_LAYERS + 1, 99])
def test_truncate_rejects_out_of_range_layer(tiny_model_dir, bad):
    enc = load_encoder(tiny_model_dir)
    with pytest.raises(LayerError):
        truncate_model(enc, bad)


def test_batched_encode_preserves_per_wave_frame_counts(tiny_model_dir):
    enc = load_encoder(tiny_model_dir)
    probe = _probe()
    single = [enc.encode([w])[0] for w in probe]
    batched = enc.encode(probe)
    for one, many in zip(single, batched, strict=True):
        for layer in range(len(one)):
            assert one[layer].shape == many[layer].shape
