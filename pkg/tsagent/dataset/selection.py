"""ANOVA F-score feature selection"""

from typing import List

import numpy as np
from sklearn.feature_selection import f_classif

from ..errors import DatasetError


def anova_scores(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """One-way ANOVA F per column; undefined scores become 0"""
    scores, _ = f_classif(np.asarray(x, dtype=float), np.asarray(y))
    scores = np.where(np.isnan(scores), 0.0, scores)
    return scores


def select_features(x: np.ndarray, y: np.ndarray, k: int) -> List[int]:
    """
    Indices of the k best columns, in original order

    Zero-variance columns are dropped first; remaining columns are ranked by
    F-score with ties going to the lower index.

    Raises:
        DatasetError: fewer than 2 samples in some class, or k exceeds the
            number of non-constant columns
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if k < 1:
        raise DatasetError(f"k must be at least 1, got {k}")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise DatasetError("feature selection needs at least 2 classes")
    if counts.min() < 2:
        raise DatasetError(f"class {int(classes[np.argmin(counts)])} has fewer than 2 samples")

    variable = np.flatnonzero(np.ptp(x, axis=0) > 0)
    if k > variable.size:
        raise DatasetError(f"k={k} exceeds the {variable.size} non-constant columns")

    scores = anova_scores(x[:, variable], y)
    order = np.lexsort((variable, -scores))
    chosen = variable[order[:k]]
    return sorted(int(c) for c in chosen)
