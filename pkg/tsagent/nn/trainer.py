"""Mini-batch training with early stopping"""

import math
import time
from typing import Optional

import numpy as np
from tqdm import tqdm

from ..errors import DatasetError, NonFiniteGradientError
from ..models.architecture import TrainReport
from ..models.dataset import Dataset
from .losses import class_weights, loss_and_grad
from .metrics import evaluate
from .model import Model
from .optim import AdamW, onecycle_lr

LATENCY_SAMPLES = 100


def _accuracy(model: Model, ds: Dataset) -> float:
    return float((model.predict(ds.x) == ds.y).mean())


def measure_latency(model: Model, x: np.ndarray, samples: int = LATENCY_SAMPLES) -> float:
    """Mean wall time of single-sample eval forwards, in milliseconds"""
    samples = max(samples, LATENCY_SAMPLES)
    rows = [x[k % len(x)][None, :] for k in range(samples)]
    model.forward(rows[0], 'eval')
    start = time.perf_counter()
    for row in rows:
        model.forward(row, 'eval')
    elapsed = time.perf_counter() - start
    return max(elapsed * 1000.0 / samples, 1e-6)


def train(model: Model, train_ds: Dataset, val_ds: Dataset, epochs: Optional[int] = None,
          quiet: bool = True) -> TrainReport:
    """
    Train ``model`` on ``train_ds``, selecting the epoch with the best
    validation accuracy.

    Args:
        epochs: Epoch budget overriding the descriptor (capped by it)
        quiet: Hide the progress bar

    Training stops after ``max(1, patience)`` consecutive epochs without a
    validation improvement; the best weights are restored before returning.
    A non-finite loss or gradient aborts the run and flags the report.
    """
    desc = model.descriptor
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise DatasetError("training needs non-empty train and validation splits")
    budget = desc.epochs if epochs is None else max(1, min(int(epochs), desc.epochs))
    x = train_ds.x.astype(model.dtype)
    y = train_ds.y
    n = len(y)
    batch = min(desc.batch_size, n)
    steps_per_epoch = math.ceil(n / batch)
    total_steps = budget * steps_per_epoch

    model.reset_rng()
    shuffle_rng = np.random.default_rng([desc.seed, 2])
    optimizer = AdamW(model, lr=desc.lr, weight_decay=desc.weight_decay)
    weights = class_weights(y, model.n_classes) if desc.loss == 'weighted_ce' else None
    patience = max(1, desc.patience)

    history = []
    best_acc, best_epoch, best_state = -1.0, 0, model.state_dict()
    stale = 0
    stopped_early = False
    aborted, abort_reason = False, ''
    step = 0

    progress = tqdm(range(budget), desc="Training", unit="epoch", disable=quiet, leave=False)
    for epoch in progress:
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            lr = onecycle_lr(step, total_steps, desc.peak_lr, desc.warmup_frac,
                             desc.div_factor, desc.final_div)
            logits = model.forward(x[idx], 'train')
            value, grad = loss_and_grad(logits, y[idx], desc.loss, weights,
                                        desc.focal_alpha, desc.focal_gamma)
            if not math.isfinite(value):
                aborted, abort_reason = True, f"non-finite loss at epoch {epoch + 1}"
                break
            model.zero_grad()
            try:
                model.backward(grad)
            except NonFiniteGradientError as exc:
                aborted, abort_reason = True, f"{exc} at epoch {epoch + 1}"
                break
            optimizer.step(lr)
            epoch_loss += value * len(idx)
            step += 1
        if aborted:
            print(f"[Train] Aborted: {abort_reason}")
            break

        train_acc = _accuracy(model, train_ds)
        val_acc = _accuracy(model, val_ds)
        history.append({
            'epoch': epoch + 1,
            'train_loss': epoch_loss / n,
            'train_accuracy': train_acc,
            'val_accuracy': val_acc,
            'lr': lr,
        })
        progress.set_postfix(loss=f"{epoch_loss / n:.4f}", val=f"{val_acc:.3f}")

        if val_acc > best_acc:
            best_acc, best_epoch, best_state = val_acc, epoch + 1, model.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                stopped_early = True
                break
    progress.close()

    model.load_state_dict(best_state)
    latency = measure_latency(model, val_ds.x.astype(model.dtype))
    metrics = evaluate(model, val_ds) if not aborted else None
    return TrainReport(
        best_val_accuracy=max(best_acc, 0.0),
        epochs_run=len(history),
        stopped_early=stopped_early,
        param_count=model.param_count,
        latency_ms=latency,
        history=history,
        best_epoch=best_epoch,
        train_accuracy=_accuracy(model, train_ds),
        metrics=metrics,
        aborted=aborted,
        abort_reason=abort_reason,
    )
