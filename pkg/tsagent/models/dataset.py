"""Feature vectors and labeled datasets"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

FEATURE_SCHEMES = ('statistical', 'flat_timeseries')


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    scheme: str
    names: Tuple[str, ...]

    def __post_init__(self):
        if self.scheme not in FEATURE_SCHEMES:
            raise ValueError(f"scheme must be one of {FEATURE_SCHEMES}")
        if self.values.ndim != 1 or self.values.shape[0] != len(self.names):
            raise ValueError("values and names must have the same length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    @property
    def dim(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: int
    sample_id: str = ''


@dataclass
class Dataset:
    """
    Feature matrix with integer labels.

    ``metadata`` is free-form JSON; ``class_counts`` in it is kept in sync
    with ``y`` by every constructor in tsagent.dataset.
    """
    x: np.ndarray
    y: np.ndarray
    n_classes: int
    names: Tuple[str, ...]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float32)
        self.y = np.asarray(self.y, dtype=np.int32)
        self.names = tuple(self.names)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ValueError(f"x {self.x.shape} and y {self.y.shape} disagree on sample count")
        if self.x.shape[1] != len(self.names):
            raise ValueError(f"x has {self.x.shape[1]} columns but {len(self.names)} names")
        if self.n_classes < 2:
            raise ValueError("n_classes must be at least 2")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("x contains NaN or Inf")
        self.metadata = dict(self.metadata)
        self.metadata['class_counts'] = self.class_counts()

    def __len__(self) -> int:
        return int(self.y.shape[0])

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def class_counts(self) -> List[int]:
        return np.bincount(self.y, minlength=self.n_classes).astype(int).tolist()

    def subset(self, indices: Sequence[int], **extra_metadata) -> 'Dataset':
        indices = np.asarray(indices, dtype=int)
        metadata = dict(self.metadata)
        sample_ids = metadata.get('sample_ids')
        if sample_ids is not None:
            metadata['sample_ids'] = [sample_ids[i] for i in indices]
        metadata.update(extra_metadata)
        return Dataset(self.x[indices], self.y[indices], self.n_classes, self.names, metadata)

    def select_columns(self, columns: Sequence[int]) -> 'Dataset':
        columns = [int(c) for c in columns]
        metadata = dict(self.metadata)
        metadata['selected_columns'] = columns
        metadata['raw_dim'] = self.dim
        return Dataset(self.x[:, columns], self.y, self.n_classes,
                       tuple(self.names[c] for c in columns), metadata)
