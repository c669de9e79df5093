"""
Stability criteria and labels

Angle, voltage and frequency checks each return a ViolationReport;
classify() combines them into a binary and a 4-class label.
"""

from typing import Optional

import numpy as np

from ..models.scenario import (
    CLASS_CODES,
    StabilityLabel,
    StabilityThresholds,
    Trajectory,
    ViolationReport,
)

# Ties between first-violation times are resolved in this order
PRIORITY = ('angle', 'frequency', 'voltage')
_TIME_EPS = 1e-9


def check_angle(traj: Trajectory, thresholds: StabilityThresholds) -> ViolationReport:
    """Largest rotor-angle separation between in-service machines"""
    mask = np.asarray(traj.in_service, dtype=bool)
    if mask.sum() < 2:
        return ViolationReport('angle', False, detail={'reason': 'fewer than 2 machines in service'})

    delta = np.degrees(traj.delta[mask])
    ids = np.asarray(traj.gen_ids)[mask]
    spread = delta.max(axis=0) - delta.min(axis=0)
    peak = int(np.argmax(spread))
    pair = (int(ids[np.argmax(delta[:, peak])]), int(ids[np.argmin(delta[:, peak])]))
    detail = {'max_spread_deg': float(spread[peak]), 'pair': pair, 'peak_time': float(traj.t[peak])}

    hits = np.flatnonzero(spread >= thresholds.angle_max)
    if hits.size == 0:
        return ViolationReport('angle', False, detail=detail)
    return ViolationReport('angle', True, float(traj.t[hits[0]]), detail)


def _in_fault(traj: Trajectory) -> np.ndarray:
    start, end = traj.fault_window
    return (traj.t >= start - _TIME_EPS) & (traj.t < end - _TIME_EPS)


def check_voltage(traj: Trajectory, thresholds: StabilityThresholds) -> ViolationReport:
    """
    Bus voltage outside [v_min, v_max] continuously for at least v_dwell

    Fault-on samples reset the dwell, so only post-clearing excursions can
    violate. The reported time is the sample at which the dwell is reached.
    """
    outside = (traj.v_mag < thresholds.v_min) | (traj.v_mag > thresholds.v_max)
    outside &= ~_in_fault(traj)[None, :]

    first_time: Optional[float] = None
    first_bus = None
    for b in range(outside.shape[0]):
        run_start = None
        for k in range(outside.shape[1]):
            if not outside[b, k]:
                run_start = None
                continue
            if run_start is None:
                run_start = k
            if traj.t[k] - traj.t[run_start] >= thresholds.v_dwell - _TIME_EPS:
                if first_time is None or traj.t[k] < first_time:
                    first_time = float(traj.t[k])
                    first_bus = traj.bus_ids[b]
                break

    v_min = float(traj.v_mag.min()) if traj.v_mag.size else 1.0
    v_max = float(traj.v_mag.max()) if traj.v_mag.size else 1.0
    detail = {'v_min': v_min, 'v_max': v_max}
    if first_time is None:
        return ViolationReport('voltage', False, detail=detail)
    detail['bus'] = int(first_bus)
    return ViolationReport('voltage', True, first_time, detail)


def check_frequency(traj: Trajectory, thresholds: StabilityThresholds) -> ViolationReport:
    """COI frequency deviation beyond df_max"""
    deviation = np.abs(traj.f_coi - traj.f0)
    detail = {'max_deviation_hz': float(deviation.max())}
    hits = np.flatnonzero(deviation > thresholds.df_max)
    if hits.size == 0:
        return ViolationReport('frequency', False, detail=detail)
    return ViolationReport('frequency', True, float(traj.t[hits[0]]), detail)


def classify(traj: Trajectory, thresholds: Optional[StabilityThresholds] = None) -> StabilityLabel:
    """
    Binary label plus the criterion that failed first

    Returns:
        StabilityLabel; multiclass codes follow CLASS_CODES
    """
    thresholds = thresholds or StabilityThresholds()
    reports = (
        check_angle(traj, thresholds),
        check_voltage(traj, thresholds),
        check_frequency(traj, thresholds),
    )
    violated = {report.criterion: report.time for report in reports if report.violated}
    if not violated:
        return StabilityLabel('stable', CLASS_CODES['stable'], {}, reports)

    earliest = min(violated.values())
    winner = next(name for name in PRIORITY
                  if name in violated and violated[name] <= earliest + _TIME_EPS)
    return StabilityLabel('unstable', CLASS_CODES[winner], violated, reports)
