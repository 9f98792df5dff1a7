"""Exact Euclidean k-nearest-neighbor search, voting, and prototype selection.

Distances are accumulated in float64 over the float32 storage and compared
as squared values (monotonic); square roots are taken only for reported
distances so that mean distances are true Euclidean averages. Ties are
broken by ascending support position, which makes every query result
deterministic and independent of block or worker layout.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimError, EmptySupportError, RangeError
from .rng import Xoshiro256StarStar
from .store import Corpus

DEFAULT_K = 21

# cap on queries*support cells materialized per distance block (~128 MB f64)
_BLOCK_CELLS = 1 << 24


@dataclass(frozen=True)
class NeighborList:
    """k support positions with ascending true Euclidean distances."""

    indices: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class VoteResult:
    """Majority-vote outcome over the k neighbors of one query."""

    predicted_class: int
    histogram: dict[int, int]
    mean_distance: float


class SupportIndex:
    """Immutable labeled vector store answering exact kNN queries."""

    def __init__(
        self,
        vectors: np.ndarray,
        class_of: np.ndarray,
        sample_ids: Sequence[str],
        k_default: int = DEFAULT_K,
        provenance: Optional[dict] = None,
    ):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise EmptySupportError("support set must be a non-empty 2-D matrix")
        if not np.isfinite(vectors).all():
            raise DimError("support vectors must be finite")
        class_of = np.asarray(class_of, dtype=np.int64)
        if class_of.shape != (vectors.shape[0],):
            raise DimError("class_of length must match the number of vectors")
        if len(sample_ids) != vectors.shape[0]:
            raise DimError("sample_ids length must match the number of vectors")
        self._vectors = vectors.copy()
        self._vectors.flags.writeable = False
        self._class_of = class_of.copy()
        self._class_of.flags.writeable = False
        self._sample_ids = tuple(sample_ids)
        self.k_default = int(k_default)
        self.provenance = dict(provenance or {})

    @property
    def n(self) -> int:
        return self._vectors.shape[0]

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def class_of(self) -> np.ndarray:
        return self._class_of

    @property
    def sample_ids(self) -> tuple[str, ...]:
        return self._sample_ids

    # -- queries ---------------------------------------------------------

    def _check_query(self, vectors: np.ndarray, k: int) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] != self.dim:
            raise DimError(
                f"query dim {vectors.shape[-1] if vectors.ndim else '?'} "
                f"!= index dim {self.dim}"
            )
        if not (1 <= k <= self.n):
            raise RangeError(f"k={k} outside [1, {self.n}]")
        finite = np.isfinite(vectors).all(axis=1)
        if not finite.all():
            bad = int(np.flatnonzero(~finite)[0])
            raise DimError(f"query row {bad} contains non-finite values")
        return vectors

    def _sq_distances(self, queries: np.ndarray) -> np.ndarray:
        """Squared distances (m x N), computed by blocked float64 differences."""
        m = queries.shape[0]
        out = np.empty((m, self.n), dtype=np.float64)
        block = max(1, _BLOCK_CELLS // max(1, m * self.dim))
        for start in range(0, self.n, block):
            chunk = self._vectors[start : start + block]
            diff = queries[:, None, :] - chunk[None, :, :]
            out[:, start : start + chunk.shape[0]] = np.square(diff).sum(axis=2)
        return out

    def query_batch(self, vectors: np.ndarray, k: Optional[int] = None):
        """Top-k indices and true distances for each query row.

        Returns (indices, distances), each of shape (m, k), rows sorted by
        ascending distance with ties by ascending support position.
        """
        k = self.k_default if k is None else int(k)
        vectors = self._check_query(vectors, k)
        d2 = self._sq_distances(vectors)
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        dist = np.sqrt(np.take_along_axis(d2, order, axis=1))
        return order, dist

    def query(self, vector: np.ndarray, k: Optional[int] = None) -> NeighborList:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1:
            raise DimError("query must be a 1-D vector")
        idx, dist = self.query_batch(vector[None, :], k)
        return NeighborList(indices=idx[0], distances=dist[0])

    def classify(self, vector: np.ndarray, k: Optional[int] = None) -> VoteResult:
        neighbors = self.query(vector, k)
        return self._vote(neighbors)

    def _vote(self, neighbors: NeighborList) -> VoteResult:
        classes = self._class_of[neighbors.indices]
        histogram: dict[int, int] = {}
        summed: dict[int, float] = {}
        for cls, dist in zip(classes.tolist(), neighbors.distances.tolist()):
            histogram[cls] = histogram.get(cls, 0) + 1
            summed[cls] = summed.get(cls, 0.0) + dist
        # tie rule: most votes, then smaller summed distance, then lower class
        winner = min(
            histogram, key=lambda c: (-histogram[c], summed[c], c)
        )
        return VoteResult(
            predicted_class=int(winner),
            histogram=histogram,
            mean_distance=float(neighbors.distances.mean()),
        )

    def classify_batch(
        self,
        vectors: np.ndarray,
        k: Optional[int] = None,
        n_workers: int = 1,
    ) -> list[VoteResult]:
        """Vote on every query row; output order matches input order
        regardless of worker count."""
        k = self.k_default if k is None else int(k)
        vectors = self._check_query(np.atleast_2d(vectors), k)
        m = vectors.shape[0]
        results: list[Optional[VoteResult]] = [None] * m
        chunks = self._chunk_ranges(m, n_workers)

        def run(start: int, stop: int) -> None:
            idx, dist = self.query_batch(vectors[start:stop], k)
            for offset in range(stop - start):
                neighbors = NeighborList(indices=idx[offset], distances=dist[offset])
                results[start + offset] = self._vote(neighbors)

        if n_workers <= 1 or len(chunks) <= 1:
            for start, stop in chunks:
                run(start, stop)
        else:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                futures = [pool.submit(run, start, stop) for start, stop in chunks]
                for fut in futures:
                    fut.result()
        return results  # type: ignore[return-value]

    @staticmethod
    def _chunk_ranges(m: int, n_workers: int) -> list[tuple[int, int]]:
        pieces = max(1, min(m, n_workers * 4))
        size = -(-m // pieces)
        return [(s, min(s + size, m)) for s in range(0, m, size)]

    # -- prototype selection ---------------------------------------------

    def condense(self, seed: int = 0) -> "SupportIndex":
        """Hart's condensed-NN reduction with a seeded presentation order.

        The returned index is 1-NN consistent: every original support vector
        is classified into its own class by 1-NN over the reduced set.
        """
        rng = Xoshiro256StarStar(seed)
        order = list(range(self.n))
        rng.shuffle(order)
        in_store = {order[0]}
        changed = True
        while changed:
            changed = False
            for i in order:
                if i in in_store:
                    continue
                store_sorted = np.fromiter(sorted(in_store), dtype=np.int64)
                diff = self._vectors[store_sorted] - self._vectors[i]
                d2 = np.square(diff).sum(axis=1)
                nearest = store_sorted[int(np.argmin(d2))]  # argmin is stable
                if self._class_of[nearest] != self._class_of[i]:
                    in_store.add(i)
                    changed = True
        selection = sorted(in_store)
        return SupportIndex(
            vectors=self._vectors[selection],
            class_of=self._class_of[selection],
            sample_ids=[self._sample_ids[i] for i in selection],
            k_default=self.k_default,
            provenance={
                **self.provenance,
                "condense_seed": int(seed),
                "condensed_from": self.n,
            },
        )


# -- module-level operations over a Corpus -------------------------------


def build_index(
    corpus: Corpus,
    selection: Optional[Sequence[int]] = None,
    k_default: int = DEFAULT_K,
) -> SupportIndex:
    """Index over the selected corpus rows (all rows when selection is None),
    preserving row order."""
    if selection is None:
        rows = np.arange(len(corpus))
    else:
        rows = np.asarray(list(selection), dtype=np.int64)
        if rows.size == 0:
            raise EmptySupportError("selection is empty")
        if len(set(rows.tolist())) != rows.size:
            raise RangeError("selection contains duplicate row positions")
        if rows.min() < 0 or rows.max() >= len(corpus):
            raise RangeError("selection contains out-of-range row positions")
    if rows.size == 0:
        raise EmptySupportError("corpus is empty")
    return SupportIndex(
        vectors=corpus.embeddings.matrix[rows],
        class_of=corpus.labels[rows],
        sample_ids=[corpus.records[i].sample_id for i in rows.tolist()],
        k_default=k_default,
    )


def query(index: SupportIndex, vector, k: Optional[int] = None) -> NeighborList:
    return index.query(vector, k)


def classify(index: SupportIndex, vector, k: Optional[int] = None) -> VoteResult:
    return index.classify(vector, k)


def classify_batch(
    index: SupportIndex, vectors, k: Optional[int] = None, n_workers: int = 1
) -> list[VoteResult]:
    return index.classify_batch(vectors, k, n_workers=n_workers)


def condense(index: SupportIndex, seed: int = 0) -> SupportIndex:
    return index.condense(seed)
