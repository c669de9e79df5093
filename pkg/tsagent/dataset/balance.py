"""Dataset assembly with class balancing, and stratified splits"""

from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DatasetError
from ..models.dataset import Dataset, LabeledSample

DEFAULT_TOLERANCE = 0.05


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``weights``"""
    if weights.sum() == 0:
        return np.zeros_like(weights, dtype=int)
    raw = weights * total / weights.sum()
    alloc = np.floor(raw).astype(int)
    remainder = total - alloc.sum()
    order = np.lexsort((np.arange(len(raw)), -(raw - alloc)))
    alloc[order[:remainder]] += 1
    return alloc


def balance_indices(y: np.ndarray, target_ratio: float, seed: int,
                    tolerance: float = DEFAULT_TOLERANCE) -> np.ndarray:
    """
    Indices kept after undersampling toward ``target_ratio`` stable (class 0)

    Unstable classes are pooled; when the pool is over-represented each
    unstable class is thinned proportionally.
    """
    y = np.asarray(y)
    if not 0.0 < target_ratio < 1.0:
        raise DatasetError(f"target_ratio must lie in (0, 1), got {target_ratio}")
    stable = np.flatnonzero(y == 0)
    unstable = np.flatnonzero(y != 0)
    if stable.size == 0:
        raise DatasetError("no stable samples but the balance target needs them")
    if unstable.size == 0:
        raise DatasetError("no unstable samples but the balance target needs them")

    ratio = stable.size / y.size
    if abs(ratio - target_ratio) <= tolerance:
        return np.arange(y.size)

    rng = np.random.default_rng(seed)
    if ratio > target_ratio:
        keep_stable = int(round(target_ratio * unstable.size / (1.0 - target_ratio)))
        chosen = rng.choice(stable, size=max(1, keep_stable), replace=False)
        return np.sort(np.concatenate([chosen, unstable]))

    keep_unstable = max(1, int(round(stable.size * (1.0 - target_ratio) / target_ratio)))
    classes = np.unique(y[unstable])
    counts = np.array([(y == c).sum() for c in classes])
    quotas = _largest_remainder(counts.astype(float), keep_unstable)
    kept = [stable]
    for cls, quota in zip(classes, quotas):
        members = np.flatnonzero(y == cls)
        kept.append(rng.choice(members, size=int(quota), replace=False))
    return np.sort(np.concatenate(kept))


def assemble(samples: Sequence[LabeledSample], target_ratio: float, seed: int,
             n_classes: int = 2, tolerance: float = DEFAULT_TOLERANCE,
             metadata: Optional[Dict[str, Any]] = None) -> Dataset:
    """
    Stack labeled samples into a Dataset, undersampling to the balance target

    Output rows keep input order and are a subset of the input rows.
    """
    if not samples:
        raise DatasetError("no samples to assemble")
    names = samples[0].features.names
    for sample in samples:
        if sample.features.names != names:
            raise DatasetError(f"sample {sample.sample_id or '?'} has a different feature layout")

    x = np.vstack([sample.features.values for sample in samples])
    y = np.array([sample.label for sample in samples], dtype=np.int32)
    before = np.bincount(y, minlength=n_classes).astype(int).tolist()
    keep = balance_indices(y, target_ratio, seed, tolerance)

    meta = dict(metadata or {})
    meta.update({
        'class_counts_before': before,
        'balance_target': target_ratio,
        'balance_tolerance': tolerance,
        'balance_seed': seed,
        'feature_scheme': samples[0].features.scheme,
        'sample_ids': [samples[i].sample_id for i in keep],
    })
    return Dataset(x[keep], y[keep], n_classes, names, meta)


def split(ds: Dataset, fractions: Tuple[float, float, float] = (0.6, 0.2, 0.2),
          seed: int = 0) -> Tuple[Dataset, Dataset, Dataset]:
    """
    Stratified, seeded train/val/test split

    Raises:
        DatasetError: fractions do not sum to 1, or a class cannot appear in
            every split that has a non-zero fraction
    """
    fractions = np.asarray(fractions, dtype=float)
    if fractions.shape != (3,) or np.any(fractions < 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise DatasetError(f"fractions must be three non-negative numbers summing to 1, got {fractions.tolist()}")

    rng = np.random.default_rng(seed)
    parts: List[List[int]] = [[], [], []]
    for cls in range(ds.n_classes):
        members = np.flatnonzero(ds.y == cls)
        if members.size == 0:
            continue
        members = rng.permutation(members)
        alloc = _largest_remainder(fractions, members.size)
        for p, (fraction, count) in enumerate(zip(fractions, alloc)):
            if fraction > 0 and count == 0:
                raise DatasetError(f"class {cls} has {members.size} samples, too few for every split")
        bounds = np.cumsum(np.concatenate([[0], alloc]))
        for p in range(3):
            parts[p].extend(members[bounds[p]:bounds[p + 1]].tolist())

    names = ('train', 'val', 'test')
    return tuple(ds.subset(sorted(part), split=name, split_seed=seed)
                 for name, part in zip(names, parts))
