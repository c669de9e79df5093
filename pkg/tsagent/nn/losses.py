"""Classification losses returning the value and its gradient w.r.t. the logits"""

from typing import Optional, Tuple

import numpy as np

from ..models.architecture import LOSSES


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def class_weights(y: np.ndarray, n_classes: int) -> np.ndarray:
    """Inverse class frequency, scaled so balanced classes weigh 1; absent classes weigh 0"""
    counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes).astype(np.float64)
    weights = np.zeros(n_classes)
    present = counts > 0
    weights[present] = counts.sum() / (present.sum() * counts[present])
    return weights


def loss_and_grad(logits: np.ndarray, labels: np.ndarray, kind: str = 'ce',
                  weights: Optional[np.ndarray] = None, alpha: float = 0.25,
                  gamma: float = 2.0) -> Tuple[float, np.ndarray]:
    """
    Mean loss over the batch and d(loss)/d(logits)

    ce:           mean of -log p_y
    weighted_ce:  sum_i w_{y_i} (-log p_{y_i}) / sum_i w_{y_i}
    focal:        mean of alpha (1 - p_t)^gamma (-log p_t), p_t = p_y

    Raises:
        ValueError: unknown loss, or a label outside [0, n_classes)
    """
    if kind not in LOSSES:
        raise ValueError(f"unknown loss '{kind}'")
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, n_classes = logits.shape
    if labels.shape != (n,):
        raise ValueError("labels must have one entry per row of logits")
    if n and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")

    work = logits.astype(np.float64)
    log_p = log_softmax(work)
    p = np.exp(log_p)
    rows = np.arange(n)
    onehot = np.zeros_like(p)
    onehot[rows, labels] = 1.0
    nll = -log_p[rows, labels]

    if kind == 'ce':
        value = nll.mean()
        grad = (p - onehot) / n
    elif kind == 'weighted_ce':
        if weights is None:
            weights = class_weights(labels, n_classes)
        w = np.asarray(weights, dtype=np.float64)[labels]
        total = w.sum()
        value = (w * nll).sum() / total
        grad = w[:, None] * (p - onehot) / total
    else:
        p_t = p[rows, labels]
        one_minus = np.clip(1.0 - p_t, 0.0, None)
        modulator = one_minus ** gamma
        value = (alpha * modulator * nll).mean()
        # chain rule through p_t, using dp_t/dz = p_t (onehot - p)
        with np.errstate(divide='ignore', invalid='ignore'):
            d_modulator = gamma * np.power(one_minus, gamma - 1.0)
        d_modulator = np.where((one_minus > 0) | (gamma >= 1.0), d_modulator, 0.0)
        d_modulator = np.nan_to_num(d_modulator, nan=0.0, posinf=0.0)
        d_pt_times_pt = alpha * (-d_modulator * nll * p_t - modulator)
        grad = d_pt_times_pt[:, None] * (onehot - p) / n

    return float(value), grad.astype(logits.dtype)
