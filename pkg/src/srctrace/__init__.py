"""Training-free attribution of generated audio to its source generator.

Operates on precomputed SSL embeddings: exact Euclidean kNN attribution,
EER-calibrated out-of-domain detection, seeded evaluation protocols, and
macro-F1 / neighbor-purity reporting.
"""

from .errors import SourceTracingError
from .estimators import (
    CondensedNearestNeighbor,
    DistanceOodDetector,
    KnnSourceClassifier,
)
from .knn import (
    DEFAULT_K,
    NeighborList,
    SupportIndex,
    VoteResult,
    build_index,
    classify,
    classify_batch,
    condense,
    query,
)
from .metrics import (
    F1Report,
    NeighborPurityMatrix,
    SweepTable,
    aggregate_sweep,
    macro_f1,
    neighbor_purity,
)
from .ood import OodCalibration, OodDecision, OodScore, calibrate, decide, score
from .splits import (
    SplitAssignment,
    SplitSpec,
    leave_n_out,
    ood_holdout,
    per_class_support,
    ratio_split,
)
from .store import (
    Corpus,
    EmbeddingSet,
    SampleRecord,
    build_corpus,
    load_embeddings,
    load_manifest,
    write_embeddings,
    write_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "SourceTracingError",
    "KnnSourceClassifier",
    "CondensedNearestNeighbor",
    "DistanceOodDetector",
    "DEFAULT_K",
    "SupportIndex",
    "NeighborList",
    "VoteResult",
    "build_index",
    "query",
    "classify",
    "classify_batch",
    "condense",
    "F1Report",
    "NeighborPurityMatrix",
    "SweepTable",
    "macro_f1",
    "neighbor_purity",
    "aggregate_sweep",
    "OodScore",
    "OodCalibration",
    "OodDecision",
    "score",
    "calibrate",
    "decide",
    "SplitSpec",
    "SplitAssignment",
    "ratio_split",
    "per_class_support",
    "ood_holdout",
    "leave_n_out",
    "SampleRecord",
    "EmbeddingSet",
    "Corpus",
    "load_embeddings",
    "write_embeddings",
    "load_manifest",
    "write_manifest",
    "build_corpus",
]
