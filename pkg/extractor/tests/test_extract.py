from pathlib import Path

import numpy as np
import pytest

from srctrace_extractor import (
    ExtractionJob,
    JobError,
    LayerError,
    model_tag,
    read_audio_list,
    run,
)

from conftest import TINY_HIDDEN, TINY_LAYERS, write_audio_list, write_wav

# The engine package is consumed only through its published file formats;
# importing it here checks interoperability from the consumer side.
from srctrace.store import build_corpus, load_embeddings, load_manifest


def _job(entries, out_dir, model_dir, **kwargs):
    defaults = dict(layers=(2,), batch_size=2)
    defaults.update(kwargs)
    return ExtractionJob(
        audio=list(entries), out_dir=Path(out_dir), model_id=model_dir, **defaults
    )


def test_run_twice_is_bit_identical(tiny_model_dir, wav_set, tmp_path):
    first = run(_job(wav_set, tmp_path / "one", tiny_model_dir, layers=(1, 2)))
    second = run(_job(wav_set, tmp_path / "two", tiny_model_dir, layers=(1, 2)))
    assert first.sample_ids == second.sample_ids == [sid for sid, _ in wav_set]
    for layer in (1, 2):
        a = first.emb_paths[layer].read_bytes()
        b = second.emb_paths[layer].read_bytes()
        assert a == b
    assert first.manifest_path.read_bytes() == second.manifest_path.read_bytes()


def test_emitted_files_load_through_the_engine(tiny_model_dir, wav_set, tmp_path):
    result = run(_job(wav_set, tmp_path / "out", tiny_model_dir))
    embeddings = load_embeddings(result.emb_paths[2])
    assert embeddings.dim == TINY_HIDDEN
    assert embeddings.count == len(wav_set)
    assert embeddings.layer_index == 2
    assert embeddings.extractor_id == model_tag(tiny_model_dir)
    records = load_manifest(result.manifest_path)
    assert [r.sample_id for r in records] == result.sample_ids
    corpus = build_corpus(records, embeddings, target="checkpoint")
    assert corpus.embeddings.matrix.shape == (len(wav_set), TINY_HIDDEN)


def test_header_dim_matches_model_hidden_size(tiny_model_dir, wav_set, tmp_path):
    result = run(_job(wav_set[:1], tmp_path / "out", tiny_model_dir))
    assert result.dim == TINY_HIDDEN
    assert load_embeddings(result.emb_paths[2]).dim == TINY_HIDDEN


def test_truncated_versus_full_audio_embeds_differently(tiny_model_dir, tmp_path):
    long_wav = write_wav(tmp_path / "ten.wav", seconds=10.0, freq=440.0)
    short_wav = write_wav(tmp_path / "five.wav", seconds=5.0, freq=440.0)
    entries = [("ten", str(long_wav)), ("five", str(short_wav))]
    result = run(_job(entries, tmp_path / "out", tiny_model_dir))
    rows = load_embeddings(result.emb_paths[2]).matrix
    assert not np.array_equal(rows[0], rows[1])


def test_undecodable_audio_goes_to_rejects_and_processing_continues(
    tiny_model_dir, wav_set, tmp_path
):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"garbage")
    entries = [wav_set[0], ("bad", str(bad)), ("gone", str(tmp_path / "missing.wav"))]
    entries += wav_set[1:]
    result = run(_job(entries, tmp_path / "out", tiny_model_dir))
    assert result.sample_ids == [sid for sid, _ in wav_set]
    assert [sid for sid, _, _ in result.rejects] == ["bad", "gone"]
    assert load_embeddings(result.emb_paths[2]).count == len(wav_set)
    lines = result.rejects_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "sample_id\taudio_path\terror"
    assert len(lines) == 3


def test_out_of_range_layer_aborts(tiny_model_dir, wav_set, tmp_path):
    with pytest.raises(LayerError):
        run(_job(wav_set, tmp_path / "out", tiny_model_dir, layers=(TINY_LAYERS + 1,)))
    with pytest.raises(LayerError):
        run(_job(wav_set, tmp_path / "out", tiny_model_dir, layers=(-1,)))


def test_long_files_are_chunk_pooled(tiny_model_dir, tmp_path):
    long_wav = write_wav(tmp_path / "long.wav", seconds=5.0, freq=330.0)
    short_wav = write_wav(tmp_path / "short.wav", seconds=1.0, freq=330.0)
    entries = [("long", str(long_wav)), ("short", str(short_wav))]
    result = run(
        _job(
            entries,
            tmp_path / "out",
            tiny_model_dir,
            max_seconds=2.0,
            chunk_seconds=1.5,
        )
    )
    rows = load_embeddings(result.emb_paths[2]).matrix
    assert rows.shape == (2, TINY_HIDDEN)
    assert np.isfinite(rows).all()
    # chunk pooling is deterministic too
    again = run(
        _job(
            entries,
            tmp_path / "again",
            tiny_model_dir,
            max_seconds=2.0,
            chunk_seconds=1.5,
        )
    )
    assert result.emb_paths[2].read_bytes() == again.emb_paths[2].read_bytes()


def test_row_order_follows_input_order_across_batch_sizes(
    tiny_model_dir, wav_set, tmp_path
):
    for batch_size in (1, 2, 5):
        result = run(
            _job(wav_set, tmp_path / f"b{batch_size}", tiny_model_dir,
                 batch_size=batch_size)
        )
        assert result.sample_ids == [sid for sid, _ in wav_set]


def test_audio_list_parsing(tmp_path):
    path = write_audio_list(
        tmp_path / "list.tsv", [("x", "/a.wav"), ("y", "/b.wav")]
    )
    assert read_audio_list(path) == [("x", "/a.wav"), ("y", "/b.wav")]
    (tmp_path / "dup.tsv").write_text("x\t/a.wav\nx\t/b.wav\n", encoding="utf-8")
    with pytest.raises(JobError):
        read_audio_list(tmp_path / "dup.tsv")
    (tmp_path / "short.tsv").write_text("only_one_column\n", encoding="utf-8")
    with pytest.raises(JobError):
        read_audio_list(tmp_path / "short.tsv")
    (tmp_path / "empty.tsv").write_text("# comment only\n", encoding="utf-8")
    with pytest.raises(JobError):
        read_audio_list(tmp_path / "empty.tsv")


def test_model_tag_sanitizes():
    assert model_tag("facebook/w2v-bert-2.0") == "w2v-bert-2.0"
    assert model_tag("/tmp/some dir/model v1/") == "model_v1"
