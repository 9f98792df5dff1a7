"""Command-line front end: batch experiments over embedding + manifest files.

Subcommands: ingest, attribute, sweep, ood, analyze-neighbors, condense,
report. All commands are config-file driven (simple key=value lines) with
full flag override, write deterministic CSV/JSON artifacts, and use exit
codes 0 (success), 2 (data error), 64 (usage error).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics, ood, splits
from .errors import CoverageError, SourceTracingError
from .knn import DEFAULT_K, SupportIndex, build_index
from .store import (
    Corpus,
    EmbeddingSet,
    build_corpus,
    load_embeddings,
    load_manifest,
    write_embeddings,
)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_config(path: str) -> dict:
    """Parse a plain-text `key = value` config file. '#' starts a comment."""
    config: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SourceTracingError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip()
    return config


def _merge(args: argparse.Namespace, key: str, default=None):
    """Flag value if given, else config file value, else default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    config = getattr(args, "_config", {})
    return config.get(key, default)


def _require(args, key: str):
    value = _merge(args, key)
    if value is None:
        raise SourceTracingError(f"missing required option --{key} (or config key)")
    return value


def _parse_seeds(raw) -> list[int]:
    if isinstance(raw, list):
        return [int(s) for s in raw]
    return [int(s) for s in str(raw).replace(",", " ").split()]


def _parse_target(raw: str):
    if raw.startswith("relabel:"):
        path = raw.split(":", 1)[1]
        mapping = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(mapping, dict):
            raise SourceTracingError(f"{path}: relabel map must be a JSON object")
        return mapping
    return raw


def _load_corpus(args) -> tuple[Corpus, EmbeddingSet]:
    records = load_manifest(_require(args, "manifest"))
    emb = load_embeddings(_require(args, "embeddings"))
    target = _parse_target(_merge(args, "target", "checkpoint"))
    return build_corpus(records, emb, target), emb


def _split_assignment(corpus: Corpus, split_spec: str, seed: int):
    if split_spec.startswith("per-class:"):
        return splits.per_class_support(corpus, int(split_spec.split(":", 1)[1]), seed)
    if split_spec.startswith("ratio:"):
        ratio = float(split_spec.split(":", 1)[1])
        return splits.ratio_split(corpus, [ratio, 1.0 - ratio], seed)
    raise SourceTracingError(
        f"unknown split spec {split_spec!r} (use ratio:<r> or per-class:<n>)"
    )


def _binary_f1(truth: Sequence[bool], predicted: Sequence[bool]) -> float:
    tp = sum(1 for t, p in zip(truth, predicted) if t and p)
    fp = sum(1 for t, p in zip(truth, predicted) if not t and p)
    fn = sum(1 for t, p in zip(truth, predicted) if t and not p)
    return 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


# -- commands ------------------------------------------------------------


def cmd_ingest(args) -> int:
    records = load_manifest(args.manifest)
    by_dataset: dict[str, list] = {}
    for rec in records:
        by_dataset.setdefault(rec.dataset, []).append(rec)
    for emb_path in args.embeddings:
        emb = load_embeddings(emb_path)
        if emb.count != len(records):
            raise SourceTracingError(
                f"{emb_path}: {emb.count} rows but manifest has {len(records)} records"
            )
        print(
            f"{emb_path}: extractor={emb.extractor_id!r} layer={emb.layer_index} "
            f"dim={emb.dim} rows={emb.count}"
        )
    print(f"{'dataset':<16}{'checkpoints':>12}{'langs':>8}{'spks':>8}{'utts':>10}")
    for dataset in sorted(by_dataset):
        recs = by_dataset[dataset]
        ckpts = {r.checkpoint for r in recs}
        langs = {r.language for r in recs if r.language}
        spks = {r.speaker for r in recs if r.speaker}
        print(
            f"{dataset:<16}{len(ckpts):>12}{len(langs) or '-':>8}"
            f"{len(spks) or '-':>8}{len(recs):>10}"
        )
    print(f"total: {len(records)} samples, "
          f"{len({r.checkpoint for r in records})} checkpoints")
    return EXIT_OK


def cmd_attribute(args) -> int:
    corpus, _ = _load_corpus(args)
    k = int(_merge(args, "k", DEFAULT_K))
    workers = int(_merge(args, "workers", 1))
    seeds = _parse_seeds(_merge(args, "seeds", "0"))
    split_spec = _merge(args, "split", "ratio:0.8")
    out_dir = Path(_require(args, "out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    per_seed: dict[str, float] = {}
    for seed in seeds:
        assignment = _split_assignment(corpus, split_spec, seed)
        assignment.write_jsonl(out_dir / f"split_seed{seed}.jsonl")
        support_rows = assignment.rows_with_role(splits.ROLE_SUPPORT)
        test_rows = assignment.rows_with_role(splits.ROLE_TEST)
        index = build_index(corpus, support_rows, k_default=k)
        votes = index.classify_batch(
            corpus.embeddings.matrix[test_rows], k, n_workers=workers
        )
        truth = [corpus.class_names[corpus.labels[i]] for i in test_rows]
        predicted = [corpus.class_names[v.predicted_class] for v in votes]
        report = metrics.macro_f1(truth, predicted)
        metrics.render_f1_report(report, out_dir, f"per_class_seed{seed}")
        per_seed[str(seed)] = report.macro_f1
        print(f"seed {seed}: macro F1 = {report.macro_f1:.4f}")

    values = np.array(list(per_seed.values()))
    _write_json(
        out_dir / "results.json",
        {
            "command": "attribute",
            "k": k,
            "split": split_spec,
            "target": corpus.target,
            "per_seed": per_seed,
            "mean_macro_f1": float(values.mean()),
            "std_macro_f1": float(values.std()),
        },
    )
    print(f"mean macro F1 = {values.mean():.4f} ± {values.std():.4f}")
    return EXIT_OK


def _parse_grid(raw: str) -> list:
    grid = []
    for token in str(raw).replace(",", " ").split():
        if token.startswith("ratio:"):
            grid.append(token)
        else:
            grid.append(int(token))
    return grid


def cmd_sweep(args) -> int:
    manifest = _require(args, "manifest")
    emb_paths = args.embeddings or str(_require(args, "embeddings")).split()
    records = load_manifest(manifest)
    target = _parse_target(_merge(args, "target", "checkpoint"))
    k = int(_merge(args, "k", DEFAULT_K))
    workers = int(_merge(args, "workers", 1))
    seeds = _parse_seeds(_merge(args, "seeds", "0"))
    grid = _parse_grid(_merge(args, "grid", "10 50 100 500 ratio:0.8"))
    out_dir = Path(_require(args, "out"))

    results = []
    for emb_path in emb_paths:
        if not Path(emb_path).exists():
            raise CoverageError(f"embedding file not found: {emb_path}")
        emb = load_embeddings(emb_path)
        corpus = build_corpus(records, emb, target)
        for setting in grid:
            for seed in seeds:
                if isinstance(setting, int):
                    assignment = splits.per_class_support(corpus, setting, seed)
                else:
                    ratio = float(setting.split(":", 1)[1])
                    assignment = splits.ratio_split(corpus, [ratio, 1.0 - ratio], seed)
                support_rows = assignment.rows_with_role(splits.ROLE_SUPPORT)
                test_rows = assignment.rows_with_role(splits.ROLE_TEST)
                index = build_index(corpus, support_rows, k_default=k)
                votes = index.classify_batch(
                    corpus.embeddings.matrix[test_rows], k, n_workers=workers
                )
                truth = [corpus.labels[i] for i in test_rows]
                predicted = [v.predicted_class for v in votes]
                f1 = metrics.macro_f1(truth, predicted).macro_f1
                results.append((emb.layer_index, setting, seed, f1))
                print(
                    f"layer {emb.layer_index} setting {setting} seed {seed}: "
                    f"F1 = {f1:.4f}"
                )
    table = metrics.aggregate_sweep(results)
    metrics.render_sweep(table, out_dir)
    return EXIT_OK


def cmd_ood(args) -> int:
    corpus, _ = _load_corpus(args)
    per_dataset = int(_merge(args, "per-dataset", 4))
    k_list = _parse_seeds(_merge(args, "k-list", str(DEFAULT_K)))
    seeds = _parse_seeds(_merge(args, "seeds", "0"))
    out_dir = Path(_require(args, "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix = corpus.embeddings.matrix
    datasets = sorted({rec.dataset for rec in corpus.records})

    # f1_cells[(k, column)] -> list over seeds
    f1_cells: dict[tuple[int, str], list[float]] = {}
    for seed in seeds:
        assignment = splits.ood_holdout(corpus, per_dataset, seed)
        assignment.write_jsonl(out_dir / f"split_seed{seed}.jsonl")
        ood_val = set(assignment.ood_validation_checkpoints)
        ood_test = set(assignment.ood_test_checkpoints)
        support_rows = assignment.rows_with_role(splits.ROLE_SUPPORT)
        val_id_rows, val_ood_rows, test_rows = [], [], []
        for i, (rec, role) in enumerate(zip(corpus.records, assignment.roles)):
            if role == splits.ROLE_VALIDATION:
                (val_ood_rows if rec.checkpoint in ood_val else val_id_rows).append(i)
            elif role == splits.ROLE_TEST:
                test_rows.append(i)
        index = build_index(corpus, support_rows)
        truth = [corpus.records[i].checkpoint in ood_test for i in test_rows]

        if not assignment.ood_checkpoints:
            # pure in-domain protocol: nothing to calibrate against, no
            # sample can be flagged OOD
            with open(
                out_dir / f"decisions_seed{seed}.csv", "w", newline="",
                encoding="utf-8",
            ) as fh:
                csv.writer(fh).writerow(
                    ["sample_id", "is_ood", "mean_distance", "margin"]
                )
            print(f"seed {seed}: no held-out checkpoints, 0 OOD decisions")
            continue

        for k in k_list:
            calibration = ood.calibrate(
                [s.mean_distance for s in ood.score_batch(index, matrix[val_id_rows], k)],
                [s.mean_distance for s in ood.score_batch(index, matrix[val_ood_rows], k)],
                k=k,
            )
            calibration.write(
                out_dir / f"calibration_k{k}_seed{seed}.json",
                extra={"split": json.loads(assignment.provenance.to_json())},
            )
            scores = ood.score_batch(
                index,
                matrix[test_rows],
                k,
                sample_ids=[corpus.records[i].sample_id for i in test_rows],
            )
            decisions = [ood.decide(calibration, s) for s in scores]
            with open(
                out_dir / f"decisions_k{k}_seed{seed}.csv", "w", newline="",
                encoding="utf-8",
            ) as fh:
                writer = csv.writer(fh)
                writer.writerow(["sample_id", "is_ood", "mean_distance", "margin"])
                for d in decisions:
                    writer.writerow(
                        [d.sample_id, int(d.is_ood), repr(d.mean_distance), repr(d.margin)]
                    )
            predicted = [d.is_ood for d in decisions]
            f1_cells.setdefault((k, "All"), []).append(_binary_f1(truth, predicted))
            for dataset in datasets:
                # OOD samples of this dataset vs all in-domain test samples
                keep = [
                    j
                    for j, i in enumerate(test_rows)
                    if (not truth[j]) or corpus.records[i].dataset == dataset
                ]
                f1_cells.setdefault((k, dataset), []).append(
                    _binary_f1([truth[j] for j in keep], [predicted[j] for j in keep])
                )
            print(
                f"seed {seed} k {k}: eer = {calibration.eer:.4f}, "
                f"OOD F1 (All) = {f1_cells[(k, 'All')][-1]:.4f}"
            )

    if not f1_cells:
        return EXIT_OK
    columns = datasets + ["All"]
    with open(out_dir / "ood_f1.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k"] + [f"{c}_{s}" for c in columns for s in ("mean", "std")])
        for k in k_list:
            row: list = [k]
            for col in columns:
                values = np.array(f1_cells[(k, col)])
                row.extend([repr(float(values.mean())), repr(float(values.std()))])
            writer.writerow(row)
    return EXIT_OK


def cmd_analyze_neighbors(args) -> int:
    corpus, _ = _load_corpus(args)
    k = int(_merge(args, "k", DEFAULT_K))
    out_dir = Path(_require(args, "out"))
    index = build_index(corpus)
    matrix = metrics.neighbor_purity(index, k=k, class_names=corpus.class_names)
    paths = metrics.render_purity(matrix, out_dir)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_condense(args) -> int:
    corpus, emb = _load_corpus(args)
    seed = int(_merge(args, "seed", 0))
    out_dir = Path(_require(args, "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    index = build_index(corpus)
    reduced = index.condense(seed)
    snapshot = EmbeddingSet(
        extractor_id=emb.extractor_id,
        layer_index=emb.layer_index,
        matrix=reduced.vectors.astype(np.float32),
    )
    write_embeddings(snapshot, out_dir / "condensed.emb")
    # sidecar class indices, u32 little-endian, aligned with snapshot rows
    (out_dir / "condensed.labels").write_bytes(
        reduced.class_of.astype("<u4").tobytes()
    )
    (out_dir / "condensed.ids.txt").write_text(
        "\n".join(reduced.sample_ids) + "\n", encoding="utf-8"
    )
    _write_json(
        out_dir / "condensed.meta.json",
        {
            "seed": seed,
            "original_size": index.n,
            "condensed_size": reduced.n,
            "classes": list(corpus.class_names),
            "provenance": reduced.provenance,
        },
    )
    print(f"condensed {index.n} -> {reduced.n} support samples")
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.input)
    out_dir = Path(_require(args, "out"))
    if src.suffix == ".json":
        doc = json.loads(src.read_text(encoding="utf-8"))
        if "fraction" in doc:
            matrix = metrics.NeighborPurityMatrix(
                classes=tuple(doc["classes"]),
                fraction=np.array(doc["fraction"], dtype=np.float64),
            )
            for p in metrics.render_purity(matrix, out_dir):
                print(f"wrote {p}")
            return EXIT_OK
        raise SourceTracingError(f"{src}: unrecognized JSON report")
    if src.suffix == ".csv":
        rows = metrics.load_sweep_csv(src)
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = [f"{setting}\tL{layer}\t{mean:.4f}±{std:.4f}" for setting, layer, mean, std in rows]
        (out_dir / "sweep_rendered.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {out_dir / 'sweep_rendered.txt'}")
        return EXIT_OK
    raise SourceTracingError(f"{src}: expected a .json or .csv report artifact")


# -- argument wiring -----------------------------------------------------


def _add_common(sub: argparse.ArgumentParser, *, embeddings_nargs=None) -> None:
    sub.add_argument("--config", help="key=value config file; flags override it")
    sub.add_argument("--manifest", help="JSON-Lines sample manifest")
    if embeddings_nargs:
        sub.add_argument("--embeddings", nargs=embeddings_nargs, help="EMB1 file(s)")
    else:
        sub.add_argument("--embeddings", help="EMB1 embedding file")
    sub.add_argument(
        "--target",
        help="checkpoint | acoustic_model | vocoder | relabel:<map.json>",
    )
    sub.add_argument("--out", help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="srctrace", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="validate a manifest + embedding files")
    p.add_argument("manifest")
    p.add_argument("embeddings", nargs="+")
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("attribute", help="in-domain attribution over seeded splits")
    _add_common(p)
    p.add_argument("--split", help="ratio:<r> or per-class:<n> (default ratio:0.8)")
    p.add_argument("--k", type=int, help=f"neighbors (default {DEFAULT_K})")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--workers", type=int, help="parallel classify workers")
    p.set_defaults(func=cmd_attribute)

    p = subs.add_parser("sweep", help="layer x support-size macro-F1 sweep")
    _add_common(p, embeddings_nargs="+")
    p.add_argument("--grid", help="support grid, e.g. '10 50 100 500 ratio:0.8'")
    p.add_argument("--k", type=int)
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("ood", help="calibrated out-of-domain detection")
    _add_common(p)
    p.add_argument("--per-dataset", type=int, help="checkpoints held out per dataset")
    p.add_argument("--k-list", help="comma-separated k values, e.g. 1,5,21")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.set_defaults(func=cmd_ood)

    p = subs.add_parser(
        "analyze-neighbors", help="neighbor-vicinity class purity matrix"
    )
    _add_common(p)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_analyze_neighbors)

    p = subs.add_parser("condense", help="Hart condensed-NN support reduction")
    _add_common(p)
    p.add_argument("--seed", type=int, help="presentation-order seed")
    p.set_defaults(func=cmd_condense)

    p = subs.add_parser("report", help="re-render a saved report artifact")
    p.add_argument("--config")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config_path = getattr(args, "config", None)
    args._config = load_config(config_path) if config_path else {}
    try:
        return args.func(args)
    except (SourceTracingError, OSError) as exc:
        print(f"srctrace: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
