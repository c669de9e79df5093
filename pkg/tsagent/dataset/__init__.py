"""Feature extraction, selection, balancing and the dataset container"""

from .features import extract_features, feature_names, channel_names, STATISTICS
from .selection import select_features, anova_scores
from .balance import assemble, split, balance_indices
from .container import (
    read_dataset,
    write_dataset,
    read_trajectories,
    write_trajectories,
    read_container,
    write_container,
)

read = read_dataset
write = write_dataset

__all__ = [
    'extract_features', 'feature_names', 'channel_names', 'STATISTICS',
    'select_features', 'anova_scores',
    'assemble', 'split', 'balance_indices',
    'read_dataset', 'write_dataset', 'read_trajectories', 'write_trajectories',
    'read_container', 'write_container', 'read', 'write',
]
