import csv
import json

import numpy as np
import pytest

from srctrace.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from srctrace.store import load_embeddings, write_embeddings, write_manifest

from conftest import cluster_corpus


def write_fixture(tmp_path, n_classes=8, per_class=30, dim=8, n_datasets=2,
                  seed=0, layer=4):
    corpus, _ = cluster_corpus(
        n_classes, per_class, dim, seed=seed, n_datasets=n_datasets
    )
    manifest = tmp_path / "manifest.jsonl"
    write_manifest(corpus.records, manifest)
    emb = tmp_path / f"synthetic_{layer}.emb"
    write_embeddings(corpus.embeddings, emb)
    return manifest, emb, corpus


class TestIngest:
    def test_valid_pair(self, tmp_path, capsys):
        manifest, emb, _ = write_fixture(tmp_path)
        assert main(["ingest", str(manifest), str(emb)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "ds0" in out and "ds1" in out
        assert "checkpoints" in out

    def test_misaligned_pair(self, tmp_path):
        manifest, emb, corpus = write_fixture(tmp_path)
        bad = tmp_path / "bad.emb"
        short = corpus.embeddings.matrix[:-1]
        write_embeddings(
            type(corpus.embeddings)("synthetic", 4, short), bad
        )
        assert main(["ingest", str(manifest), str(bad)]) == EXIT_DATA

    def test_unknown_flag_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["ingest", "--frobnicate"])
        assert exc.value.code == EXIT_USAGE

    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EXIT_USAGE


class TestAttribute:
    def test_fixture_scores_high(self, tmp_path):
        manifest, emb, _ = write_fixture(tmp_path)
        out = tmp_path / "out"
        code = main([
            "attribute", "--manifest", str(manifest), "--embeddings", str(emb),
            "--seeds", "1,2,3", "--k", "5", "--out", str(out),
        ])
        assert code == EXIT_OK
        results = json.loads((out / "results.json").read_text())
        assert len(results["per_seed"]) == 3
        assert results["mean_macro_f1"] >= 0.95

    def test_single_class_is_perfect(self, tmp_path):
        manifest, emb, _ = write_fixture(tmp_path, n_classes=1, per_class=40)
        out = tmp_path / "out"
        assert main([
            "attribute", "--manifest", str(manifest), "--embeddings", str(emb),
            "--seeds", "0", "--k", "3", "--out", str(out),
        ]) == EXIT_OK
        results = json.loads((out / "results.json").read_text())
        assert results["mean_macro_f1"] == 1.0

    def test_rerun_is_byte_identical(self, tmp_path):
        manifest, emb, _ = write_fixture(tmp_path)
        out = tmp_path / "out"
        args = [
            "attribute", "--manifest", str(manifest), "--embeddings", str(emb),
            "--seeds", "0,1", "--k", "5", "--out", str(out),
        ]
        assert main(args) == EXIT_OK
        snapshot = {
            p.name: p.read_bytes() for p in out.iterdir()
        }
        assert main(args) == EXIT_OK
        assert {p.name: p.read_bytes() for p in out.iterdir()} == snapshot

    def test_config_file_with_flag_override(self, tmp_path):
        manifest, emb, _ = write_fixture(tmp_path)
        out_config = tmp_path / "from_config"
        config = tmp_path / "run.cfg"
        config.write_text(
            f"manifest = {manifest}\n"
            f"embeddings = {emb}\n"
            f"out = {out_config}\n"
            "k = 5\n"
            "seeds = 0  # single seed\n"
        )
        assert main(["attribute", "--config", str(config)]) == EXIT_OK
        assert (out_config / "results.json").exists()

        out_flag = tmp_path / "from_flag"
        assert main([
            "attribute", "--config", str(config), "--out", str(out_flag)
        ]) == EXIT_OK
        assert (out_flag / "results.json").exists()


class TestSweep:
    def test_two_layers_two_settings(self, tmp_path):
        manifest, emb4, corpus = write_fixture(tmp_path, layer=4)
        emb9 = tmp_path / "synthetic_9.emb"
        write_embeddings(
            type(corpus.embeddings)("synthetic", 9, corpus.embeddings.matrix),
            emb9,
        )
        out = tmp_path / "sweep"
        code = main([
            "sweep", "--manifest", str(manifest),
            "--embeddings", str(emb4), str(emb9),
            "--grid", "5 ratio:0.8", "--seeds", "0", "--k", "3",
            "--out", str(out),
        ])
        assert code == EXIT_OK
        with open(out / "sweep.csv") as fh:
            rows = list(csv.reader(fh))[1:]
        # (2 settings + column_mean) x 2 layers
        assert len(rows) == 6

    def test_missing_layer_file(self, tmp_path):
        manifest, emb, _ = write_fixture(tmp_path)
        code = main([
            "sweep", "--manifest", str(manifest),
            "--embeddings", str(emb), str(tmp_path / "nope.emb"),
            "--grid", "5", "--seeds", "0", "--out", str(tmp_path / "o"),
        ])
        assert code == EXIT_DATA


class TestOod:
    def test_k_list_produces_calibrations(self, tmp_path):
        manifest, emb, _ = write_fixture(
            tmp_path, n_classes=12, per_class=24, n_datasets=2
        )
        out = tmp_path / "ood"
        code = main([
            "ood", "--manifest", str(manifest), "--embeddings", str(emb),
            "--per-dataset", "1", "--k-list", "1,5", "--seeds", "0",
            "--out", str(out),
        ])
        assert code == EXIT_OK
        assert (out / "calibration_k1_seed0.json").exists()
        assert (out / "calibration_k5_seed0.json").exists()
        with open(out / "ood_f1.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 3  # header + one row per k
        cal = json.loads((out / "calibration_k1_seed0.json").read_text())
        assert set(cal) >= {"threshold", "k", "eer", "counts"}

    def test_zero_holdout_has_no_decisions(self, tmp_path):
        manifest, emb, _ = write_fixture(tmp_path, n_classes=6, per_class=20)
        out = tmp_path / "ood0"
        code = main([
            "ood", "--manifest", str(manifest), "--embeddings", str(emb),
            "--per-dataset", "0", "--seeds", "0", "--out", str(out),
        ])
        assert code == EXIT_OK
        with open(out / "decisions_seed0.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows == [["sample_id", "is_ood", "mean_distance", "margin"]]
        assert not (out / "ood_f1.csv").exists()


class TestAnalyzeNeighbors:
    def test_purity_artifacts(self, tmp_path):
        manifest, emb, _ = write_fixture(tmp_path, n_classes=4, per_class=30)
        out = tmp_path / "purity"
        code = main([
            "analyze-neighbors", "--manifest", str(manifest),
            "--embeddings", str(emb), "--k", "7", "--out", str(out),
        ])
        assert code == EXIT_OK
        doc = json.loads((out / "purity.json").read_text())
        assert len(doc["classes"]) == 4
        np.testing.assert_allclose(np.sum(doc["fraction"], axis=1), 1.0, atol=1e-9)


class TestCondense:
    def test_snapshot_round_trips(self, tmp_path):
        manifest, emb, corpus = write_fixture(tmp_path, n_classes=4, per_class=25)
        out = tmp_path / "cond"
        code = main([
            "condense", "--manifest", str(manifest), "--embeddings", str(emb),
            "--seed", "7", "--out", str(out),
        ])
        assert code == EXIT_OK
        snapshot = load_embeddings(out / "condensed.emb")
        labels = np.frombuffer((out / "condensed.labels").read_bytes(), dtype="<u4")
        assert snapshot.count == len(labels)
        assert snapshot.count < len(corpus)
        meta = json.loads((out / "condensed.meta.json").read_text())
        assert meta["seed"] == 7
        assert meta["condensed_size"] == snapshot.count


class TestReport:
    def test_rerender_purity_json(self, tmp_path):
        manifest, emb, _ = write_fixture(tmp_path, n_classes=3, per_class=20)
        out = tmp_path / "p"
        main([
            "analyze-neighbors", "--manifest", str(manifest),
            "--embeddings", str(emb), "--k", "5", "--out", str(out),
        ])
        out2 = tmp_path / "p2"
        code = main(["report", "--input", str(out / "purity.json"), "--out", str(out2)])
        assert code == EXIT_OK
        assert (out2 / "purity.csv").read_bytes() == (out / "purity.csv").read_bytes()

    def test_rerender_sweep_csv(self, tmp_path):
        manifest, emb, _ = write_fixture(tmp_path)
        out = tmp_path / "s"
        main([
            "sweep", "--manifest", str(manifest), "--embeddings", str(emb),
            "--grid", "5", "--seeds", "0", "--k", "3", "--out", str(out),
        ])
        out2 = tmp_path / "s2"
        assert main(["report", "--input", str(out / "sweep.csv"),
                     "--out", str(out2)]) == EXIT_OK
        assert (out2 / "sweep_rendered.txt").exists()

    def test_unknown_input_rejected(self, tmp_path):
        bad = tmp_path / "x.bin"
        bad.write_bytes(b"\x00")
        assert main(["report", "--input", str(bad),
                     "--out", str(tmp_path / "o")]) == EXIT_DATA
