"""Distance-based detection of samples from unseen generators.

A sample's score is the average true Euclidean distance to its k nearest
support neighbors. The accept/reject threshold is calibrated on validation
scores at the equal-error-rate operating point; out-of-domain is the
positive class throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CalibrationError
from .knn import SupportIndex


@dataclass(frozen=True)
class OodScore:
    sample_id: Optional[str]
    mean_distance: float


@dataclass(frozen=True)
class OodCalibration:
    """EER-derived distance threshold plus its provenance."""

    threshold: float
    k: int
    eer: float
    n_in_domain: int
    n_ood: int

    def to_json(self, extra: Optional[dict] = None) -> str:
        doc = {
            "threshold": self.threshold,
            "k": self.k,
            "eer": self.eer,
            "counts": {"in_domain": self.n_in_domain, "ood": self.n_ood},
        }
        if extra:
            doc["provenance"] = extra
        return json.dumps(doc, sort_keys=True)

    def write(self, path: Union[str, Path], extra: Optional[dict] = None) -> None:
        Path(path).write_text(self.to_json(extra) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class OodDecision:
    sample_id: Optional[str]
    is_ood: bool
    mean_distance: float
    margin: float


def score(
    index: SupportIndex,
    vector: np.ndarray,
    k: Optional[int] = None,
    sample_id: Optional[str] = None,
) -> OodScore:
    """Mean true Euclidean distance to the k nearest support neighbors."""
    neighbors = index.query(vector, k)
    return OodScore(sample_id=sample_id, mean_distance=float(neighbors.distances.mean()))


def score_batch(
    index: SupportIndex,
    vectors: np.ndarray,
    k: Optional[int] = None,
    sample_ids: Optional[Sequence[str]] = None,
) -> list[OodScore]:
    _, dist = index.query_batch(vectors, k)
    means = dist.mean(axis=1)
    ids = sample_ids if sample_ids is not None else [None] * len(means)
    return [OodScore(sample_id=s, mean_distance=float(m)) for s, m in zip(ids, means)]


def _as_floats(scores) -> np.ndarray:
    values = [s.mean_distance if isinstance(s, OodScore) else float(s) for s in scores]
    return np.asarray(values, dtype=np.float64)


def calibrate(in_domain_scores, ood_scores, k: int = 21) -> OodCalibration:
    """Pick the threshold minimizing |FAR - FRR| over all candidates.

    Candidates are the midpoints between consecutive distinct pooled scores
    plus -inf/+inf sentinels. FRR(t) is the fraction of in-domain scores
    above t (falsely flagged OOD); FAR(t) the fraction of OOD scores at or
    below t (falsely accepted). Ties pick the smaller threshold; the
    reported EER is (FAR + FRR) / 2 at the chosen threshold.
    """
    ins = _as_floats(in_domain_scores)
    oods = _as_floats(ood_scores)
    if ins.size == 0 or oods.size == 0:
        raise CalibrationError("both in-domain and OOD score lists must be non-empty")
    pooled = np.unique(np.concatenate([ins, oods]))
    candidates = [-math.inf]
    candidates.extend(((pooled[:-1] + pooled[1:]) / 2.0).tolist())
    candidates.append(math.inf)
    best_t, best_gap, best_eer = None, None, None
    for t in candidates:
        frr = float(np.mean(ins > t))
        far = float(np.mean(oods <= t))
        gap = abs(far - frr)
        if best_gap is None or gap < best_gap:
            best_t, best_gap, best_eer = t, gap, (far + frr) / 2.0
    return OodCalibration(
        threshold=float(best_t),
        k=int(k),
        eer=float(best_eer),
        n_in_domain=int(ins.size),
        n_ood=int(oods.size),
    )


def decide(calibration: OodCalibration, sample_score: OodScore) -> OodDecision:
    """Flag OOD iff the score strictly exceeds the calibrated threshold."""
    d = sample_score.mean_distance
    return OodDecision(
        sample_id=sample_score.sample_id,
        is_ood=d > calibration.threshold,
        mean_distance=d,
        margin=d - calibration.threshold,
    )
