"""scikit-learn style wrappers so the search engine composes with the
wider ecosystem (pipelines, cross-validation, get_params)."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .knn import DEFAULT_K, SupportIndex
from .ood import OodCalibration, calibrate, score_batch
from .validation import check_labels, check_matrix


class KnnSourceClassifier(BaseEstimator, ClassifierMixin):
    """Exact Euclidean kNN with majority voting over a labeled support set.

    Training-free: fit() only stores the support set. Predictions are
    deterministic under the documented tie rules.
    """

    def __init__(self, k: int = DEFAULT_K, n_workers: int = 1):
        self.k = k
        self.n_workers = n_workers

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = check_labels(y, X.shape[0])
        self.classes_, encoded = np.unique(y, return_inverse=True)
        self.index_ = SupportIndex(
            vectors=X,
            class_of=encoded,
            sample_ids=[str(i) for i in range(X.shape[0])],
            k_default=self.k,
        )
        return self

    def _require_fit(self) -> SupportIndex:
        index = getattr(self, "index_", None)
        if index is None:
            raise NotFittedError("call fit() before predicting")
        return index

    def predict(self, X):
        index = self._require_fit()
        X = check_matrix(X, "X")
        votes = index.classify_batch(X, self.k, n_workers=self.n_workers)
        return self.classes_[[v.predicted_class for v in votes]]

    def kneighbors(self, X, k: Optional[int] = None):
        index = self._require_fit()
        X = check_matrix(X, "X")
        return index.query_batch(X, self.k if k is None else k)

    def mean_distances(self, X, k: Optional[int] = None):
        """Average distance to the k nearest support neighbors per row."""
        index = self._require_fit()
        X = check_matrix(X, "X")
        _, dist = index.query_batch(X, self.k if k is None else k)
        return dist.mean(axis=1)


class CondensedNearestNeighbor(BaseEstimator):
    """Hart prototype selection; transform() reduces (X, y) to a 1-NN
    consistent subset."""

    def __init__(self, seed: int = 0, k: int = DEFAULT_K):
        self.seed = seed
        self.k = k

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = check_labels(y, X.shape[0])
        classes, encoded = np.unique(y, return_inverse=True)
        full = SupportIndex(
            vectors=X,
            class_of=encoded,
            sample_ids=[str(i) for i in range(X.shape[0])],
            k_default=self.k,
        )
        reduced = full.condense(self.seed)
        self.classes_ = classes
        self.selected_indices_ = np.array(
            [int(s) for s in reduced.sample_ids], dtype=np.int64
        )
        self.index_ = reduced
        return self

    def transform(self, X, y):
        if not hasattr(self, "selected_indices_"):
            raise NotFittedError("call fit() before transform")
        sel = self.selected_indices_
        return np.asarray(X)[sel], np.asarray(y)[sel]

    def fit_transform(self, X, y):
        return self.fit(X, y).transform(X, y)


class DistanceOodDetector(BaseEstimator):
    """Flags samples whose mean distance to the k nearest support
    neighbors exceeds an EER-calibrated threshold. OOD is the positive
    class."""

    def __init__(self, k: int = DEFAULT_K):
        self.k = k

    def fit(self, X_support):
        X_support = check_matrix(X_support, "X_support")
        self.index_ = SupportIndex(
            vectors=X_support,
            class_of=np.zeros(X_support.shape[0], dtype=np.int64),
            sample_ids=[str(i) for i in range(X_support.shape[0])],
            k_default=self.k,
        )
        return self

    def _require_fit(self) -> SupportIndex:
        index = getattr(self, "index_", None)
        if index is None:
            raise NotFittedError("call fit() before scoring")
        return index

    def score_samples(self, X):
        index = self._require_fit()
        X = check_matrix(X, "X")
        return np.array(
            [s.mean_distance for s in score_batch(index, X, self.k)]
        )

    def calibrate(self, X_val_in_domain, X_val_ood) -> OodCalibration:
        self.calibration_ = calibrate(
            self.score_samples(X_val_in_domain),
            self.score_samples(X_val_ood),
            k=self.k,
        )
        return self.calibration_

    def predict(self, X):
        calibration = getattr(self, "calibration_", None)
        if calibration is None:
            raise NotFittedError("call calibrate() before predict")
        return self.score_samples(X) > calibration.threshold
