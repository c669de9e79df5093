"""Trajectory to feature-vector conversion"""

from typing import Sequence, Tuple

import numpy as np

from ..models.dataset import FeatureVector
from ..models.scenario import Trajectory

STATISTICS = ('mean', 'std', 'min', 'max', 'final', 'max_step')


def channel_names(gen_ids: Sequence[int], bus_ids: Sequence[int]) -> Tuple[str, ...]:
    return (tuple(f"delta_g{g}" for g in gen_ids)
            + tuple(f"omega_g{g}" for g in gen_ids)
            + tuple(f"v_bus{b}" for b in bus_ids)
            + ('f_coi',))


def feature_names(gen_ids: Sequence[int], bus_ids: Sequence[int], scheme: str,
                  n_points: int = 101) -> Tuple[str, ...]:
    """Feature names depend only on the element ids and the scheme"""
    channels = channel_names(gen_ids, bus_ids)
    if scheme == 'statistical':
        return tuple(f"{c}.{s}" for c in channels for s in STATISTICS)
    if scheme == 'flat_timeseries':
        return tuple(f"{c}@{k}" for c in channels for k in range(n_points))
    raise ValueError(f"unknown feature scheme {scheme!r}")


def _channels(traj: Trajectory) -> np.ndarray:
    return np.vstack([traj.delta_coi(), traj.omega, traj.v_mag, traj.f_coi[None, :]])


def _statistics(channels: np.ndarray) -> np.ndarray:
    if channels.shape[1] > 1:
        max_step = np.abs(np.diff(channels, axis=1)).max(axis=1)
    else:
        max_step = np.zeros(channels.shape[0])
    block = np.column_stack([
        channels.mean(axis=1),
        channels.std(axis=1),
        channels.min(axis=1),
        channels.max(axis=1),
        channels[:, -1],
        max_step,
    ])
    return block.reshape(-1)


def extract_features(traj: Trajectory, scheme: str = 'statistical') -> FeatureVector:
    """
    Flatten a trajectory into a fixed-order feature vector

    Channels: COI-relative angles, speeds, bus voltages, COI frequency.
    """
    channels = _channels(traj)
    names = feature_names(traj.gen_ids, traj.bus_ids, scheme, traj.n_points)
    if scheme == 'statistical':
        values = _statistics(channels)
    else:
        values = channels.reshape(-1)
    return FeatureVector(values=values.astype(float), scheme=scheme, names=names)
