"""Small input-validation helpers shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np

from .errors import AlignmentError, DataError


def check_matrix(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DataError(f"{name} contains non-finite values")
    return X


def check_labels(y, n_rows: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise DataError(f"y must be 1-D, got shape {y.shape}")
    if y.shape[0] != n_rows:
        raise AlignmentError(f"y has {y.shape[0]} entries for {n_rows} rows")
    return y
