"""AdamW optimizer and the one-cycle learning-rate schedule"""

import math
from typing import Dict, Tuple

import numpy as np


class AdamW:
    """
    Adam with decoupled weight decay

    Each step first shrinks parameters by ``lr * weight_decay`` and then
    applies the bias-corrected Adam update.
    """

    def __init__(self, model, lr: float = 1e-3, weight_decay: float = 1e-4,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.model = model
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, lr: float = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, layer, key in self.model.parameters():
            param = layer.params[key]
            grad = layer.grads[key]
            if name not in self.m:
                self.m[name] = np.zeros_like(param)
                self.v[name] = np.zeros_like(param)
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            if self.weight_decay:
                param = param * (1.0 - lr * self.weight_decay)
            update = lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            layer.params[key] = (param - update).astype(param.dtype)


def _cosine(start: float, end: float, pct: float) -> float:
    return end + (start - end) / 2.0 * (math.cos(math.pi * pct) + 1.0)


def warmup_end(total_steps: int, warmup_frac: float) -> float:
    """Step index at which the schedule peaks"""
    return warmup_frac * total_steps - 1.0


def onecycle_lr(step: int, total_steps: int, max_lr: float, warmup_frac: float = 0.3,
                div_factor: float = 25.0, final_div: float = 1e4) -> float:
    """
    Learning rate at ``step`` of a one-cycle schedule

    Cosine warmup from ``max_lr / div_factor`` to ``max_lr`` ending at step
    ``warmup_frac * total_steps - 1``, then cosine annealing to
    ``max_lr / (div_factor * final_div)`` at the last step.
    """
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    initial = max_lr / div_factor
    final = initial / final_div
    peak = warmup_end(total_steps, warmup_frac)
    last = total_steps - 1
    if total_steps == 1:
        return max_lr
    if peak > 0 and step <= peak:
        return _cosine(initial, max_lr, step / peak)
    start = max(peak, 0.0)
    if last <= start:
        return final
    return _cosine(max_lr, final, (step - start) / (last - start))
