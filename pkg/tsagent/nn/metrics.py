"""Classification metrics"""

from typing import Optional

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from ..errors import DatasetError
from ..models.architecture import Metrics


def auc_roc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    Area under the ROC curve by the rank-sum statistic (ties count one half)

    Raises:
        ValueError: labels hold a single class
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def compute_metrics(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int,
                    scores: Optional[np.ndarray] = None) -> Metrics:
    """Confusion-matrix metrics; ``scores`` (positive-class probability) adds AUC for binary tasks"""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise DatasetError("cannot compute metrics on an empty split")
    labels = list(range(n_classes))
    cm = confusion_matrix(y_true, y_pred, labels=labels)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, zero_division=0)
    auc = None
    if scores is not None and n_classes == 2:
        try:
            auc = auc_roc(scores, y_true)
        except ValueError:
            print("[WARNING] Split holds a single class; AUC left undefined")
    return Metrics(
        accuracy=float(np.trace(cm) / cm.sum()),
        precision=tuple(float(v) for v in precision),
        recall=tuple(float(v) for v in recall),
        f1=tuple(float(v) for v in f1),
        support=tuple(int(v) for v in support),
        macro_f1=float(np.mean(f1)),
        confusion=tuple(tuple(int(c) for c in row) for row in cm),
        auc_roc=auc,
    )


def evaluate(model, ds) -> Metrics:
    """Metrics of ``model`` on a dataset split"""
    if len(ds) == 0:
        raise DatasetError("cannot evaluate on an empty split")
    proba = model.predict_proba(ds.x)
    pred = proba.argmax(axis=1)
    scores = proba[:, 1] if ds.n_classes == 2 else None
    return compute_metrics(ds.y, pred, ds.n_classes, scores)
