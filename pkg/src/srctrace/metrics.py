"""Macro-F1, neighbor purity, sweep aggregation, and report rendering."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import AlignmentError, CoverageError, DataError, RangeError
from .knn import SupportIndex


@dataclass(frozen=True)
class F1Report:
    per_class_f1: dict
    macro_f1: float
    support_counts: dict


@dataclass(frozen=True)
class NeighborPurityMatrix:
    """fraction[i][j]: share of class-i queries' neighbors that belong to
    class j. Rows sum to 1; the matrix is generally asymmetric."""

    classes: tuple
    fraction: np.ndarray


@dataclass(frozen=True)
class SweepTable:
    """Mean +/- population std of macro F1 per (support setting, layer) cell,
    with a final row of per-layer column means."""

    settings: tuple
    layers: tuple
    mean: np.ndarray  # rows x layers
    std: np.ndarray
    seeds: tuple


def macro_f1(truth: Sequence, predicted: Sequence) -> F1Report:
    """Unweighted mean of one-vs-rest F1 over classes present in truth or
    predictions; classes with P + R = 0 contribute 0."""
    truth = list(truth)
    predicted = list(predicted)
    if len(truth) != len(predicted):
        raise AlignmentError(
            f"truth has {len(truth)} entries, predictions {len(predicted)}"
        )
    if not truth:
        raise AlignmentError("truth and predictions are empty")
    classes = sorted(set(truth) | set(predicted))
    per_class: dict = {}
    support: dict = {}
    for cls in classes:
        tp = sum(1 for t, p in zip(truth, predicted) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(truth, predicted) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(truth, predicted) if t == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_class[cls] = (
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
        support[cls] = tp + fn
    return F1Report(
        per_class_f1=per_class,
        macro_f1=sum(per_class.values()) / len(classes),
        support_counts=support,
    )


def neighbor_purity(
    index: SupportIndex,
    k: int = 21,
    class_names: Optional[Sequence[str]] = None,
) -> NeighborPurityMatrix:
    """Class composition of each support sample's k-neighbor vicinity,
    excluding the sample itself."""
    if not (1 <= k <= index.n - 1):
        raise RangeError(f"k={k} needs 1 <= k <= N-1 (N={index.n})")
    n_classes = int(index.class_of.max()) + 1
    if class_names is None:
        class_names = tuple(str(c) for c in range(n_classes))
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    idx, _ = index.query_batch(index.vectors, k + 1)
    for i in range(index.n):
        row = idx[i]
        if i in row:
            neighbors = row[row != i]
        else:
            neighbors = row[:-1]
        src = index.class_of[i]
        for cls in index.class_of[neighbors]:
            counts[src, cls] += 1
    class_sizes = np.bincount(index.class_of, minlength=n_classes)
    denom = (class_sizes * k).astype(np.float64)
    fraction = counts / denom[:, None]
    return NeighborPurityMatrix(classes=tuple(class_names), fraction=fraction)


def aggregate_sweep(results: Sequence[tuple]) -> SweepTable:
    """Aggregate (layer, support_setting, seed, macro_f1) tuples into a
    table; every cell must cover the same seed multiset."""
    if not results:
        raise CoverageError("no sweep results to aggregate")
    cells: dict = {}
    for layer, setting, seed, f1 in results:
        cells.setdefault((setting, layer), []).append((seed, float(f1)))
    settings = sorted({s for s, _ in cells}, key=_setting_key)
    layers = sorted({l for _, l in cells})
    seed_sets = {
        tuple(sorted(seed for seed, _ in entries)) for entries in cells.values()
    }
    if len(seed_sets) != 1 or len(cells) != len(settings) * len(layers):
        raise CoverageError("ragged sweep: cells do not share one seed multiset")
    seeds = next(iter(seed_sets))
    mean = np.zeros((len(settings) + 1, len(layers)))
    std = np.zeros_like(mean)
    for (setting, layer), entries in cells.items():
        i, j = settings.index(setting), layers.index(layer)
        values = np.array([v for _, v in sorted(entries)])
        mean[i, j] = values.mean()
        std[i, j] = values.std()  # population std
    mean[-1] = mean[:-1].mean(axis=0)  # per-layer column average
    return SweepTable(
        settings=tuple(settings),
        layers=tuple(layers),
        mean=mean,
        std=std,
        seeds=tuple(seeds),
    )


def _setting_key(setting) -> tuple:
    if isinstance(setting, (int, np.integer)):
        return (0, int(setting), "")
    return (1, 0, str(setting))


# -- rendering -----------------------------------------------------------


def render_f1_report(report: F1Report, out_dir: Union[str, Path], name: str) -> list[Path]:
    """Write <name>.csv (per-class rows) and <name>.txt (summary)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "f1", "support"])
        for cls in sorted(report.per_class_f1):
            writer.writerow(
                [cls, repr(report.per_class_f1[cls]), report.support_counts[cls]]
            )
    txt_path = out_dir / f"{name}.txt"
    txt_path.write_text(
        f"classes: {len(report.per_class_f1)}\n"
        f"macro_f1: {report.macro_f1:.6f}\n",
        encoding="utf-8",
    )
    return [csv_path, txt_path]


def render_purity(
    matrix: NeighborPurityMatrix, out_dir: Union[str, Path], name: str = "purity"
) -> list[Path]:
    """Write <name>.csv and <name>.json for external plotting."""
    if matrix.fraction.size == 0 or not matrix.classes:
        raise DataError("purity matrix is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class"] + list(matrix.classes))
        for cls, row in zip(matrix.classes, matrix.fraction):
            writer.writerow([cls] + [repr(float(v)) for v in row])
    json_path = out_dir / f"{name}.json"
    json_path.write_text(
        json.dumps(
            {
                "classes": list(matrix.classes),
                "fraction": [[float(v) for v in row] for row in matrix.fraction],
            },
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return [csv_path, json_path]


def render_sweep(
    table: SweepTable, out_dir: Union[str, Path], name: str = "sweep"
) -> list[Path]:
    """Write <name>.csv (long form, round-trippable) and <name>.txt
    (mean +/- std grid, std across the recorded seeds)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    row_names = [str(s) for s in table.settings] + ["column_mean"]
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "layer", "mean", "std"])
        for i, setting in enumerate(row_names):
            for j, layer in enumerate(table.layers):
                writer.writerow(
                    [setting, layer, repr(float(table.mean[i, j])), repr(float(table.std[i, j]))]
                )
    txt_path = out_dir / f"{name}.txt"
    lines = [
        f"macro F1, mean±std (population) across seeds {list(table.seeds)}",
        "setting\t" + "\t".join(f"L{l}" for l in table.layers),
    ]
    for i, setting in enumerate(row_names):
        cells = [
            f"{table.mean[i, j]:.4f}±{table.std[i, j]:.4f}"
            for j in range(len(table.layers))
        ]
        lines.append(f"{setting}\t" + "\t".join(cells))
    txt_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [csv_path, txt_path]


def load_sweep_csv(path: Union[str, Path]) -> list[tuple]:
    """Read the long-form sweep CSV back as (setting, layer, mean, std) rows."""
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["setting", "layer", "mean", "std"]:
            raise DataError(f"{path}: unexpected sweep CSV header {header}")
        for setting, layer, mean, std in reader:
            rows.append((setting, int(layer), float(mean), float(std)))
    return rows
