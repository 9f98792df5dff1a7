import pytest

from srctrace_extractor.cli import EXIT_DATA, EXIT_OK, main, parse_layers

from srctrace.cli import main as engine_main

from conftest import write_audio_list


def test_parse_layers_forms():
    assert parse_layers("4") == (4,)
    assert parse_layers("1,2,4") == (1, 2, 4)
    assert parse_layers("1..3") == (1, 2, 3)
    assert parse_layers("0, 2..3") == (0, 2, 3)
    with pytest.raises(ValueError):
        parse_layers(",")


def test_extract_end_to_end_then_engine_ingest(
    tiny_model_dir, wav_set, tmp_path, capsys
):
    audio_list = write_audio_list(tmp_path / "list.tsv", wav_set)
    out = tmp_path / "out"
    code = main(
        [
            "extract",
            "--model", tiny_model_dir,
            "--layers", "1..2",
            "--audio-list", str(audio_list),
            "--out", str(out),
            "--batch-size", "2",
        ]
    )
    assert code == EXIT_OK
    emb = next(out.glob("*_2.emb"))
    # the skeleton manifest plus the emitted file pass the engine's ingest
    assert engine_main(["ingest", str(out / "manifest.skeleton.jsonl"), str(emb)]) == 0
    capsys.readouterr()


def test_missing_audio_list_exits_2(tiny_model_dir, tmp_path, capsys):
    code = main(
        [
            "extract",
            "--model", tiny_model_dir,
            "--audio-list", str(tmp_path / "nope.tsv"),
            "--out", str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_DATA
    capsys.readouterr()


def test_out_of_range_layer_exits_2(tiny_model_dir, wav_set, tmp_path, capsys):
    audio_list = write_audio_list(tmp_path / "list.tsv", wav_set)
    code = main(
        [
            "extract",
            "--model", tiny_model_dir,
            "--layers", "99",
            "--audio-list", str(audio_list),
            "--out", str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_DATA
    capsys.readouterr()


def test_usage_errors_exit_64(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["extract", "--no-such-flag"])
    assert excinfo.value.code == 64
    with pytest.raises(SystemExit) as excinfo:
        main(["extract", "--layers", ",", "--audio-list", "x", "--out", "y"])
    assert excinfo.value.code == 64
    capsys.readouterr()
