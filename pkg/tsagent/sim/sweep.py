"""Clearing-time sweeps"""

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

from ..core.labeling import classify
from ..grid.power_flow import power_flow
from ..models.grid import GridCase
from ..models.scenario import Scenario, SimulationConfig, StabilityLabel, StabilityThresholds, Trajectory
from .integrator import integrate
from .staging import stage_scenario


@dataclass
class SweepResult:
    durations: List[float]
    trajectories: List[Trajectory]
    labels: List[StabilityLabel]
    threshold_index: Optional[int]
    monotone: bool

    @property
    def outcomes(self) -> List[str]:
        return [label.binary for label in self.labels]

    def critical_clearing_bracket(self):
        """(last stable duration, first unstable duration); either may be None"""
        if self.threshold_index is None:
            return (self.durations[-1] if self.durations else None, None)
        if self.threshold_index == 0:
            return (None, self.durations[0])
        return (self.durations[self.threshold_index - 1], self.durations[self.threshold_index])


def critical_clearing_sweep(case: GridCase, template: Scenario, durations: Sequence[float],
                            thresholds: Optional[StabilityThresholds] = None,
                            cfg: Optional[SimulationConfig] = None) -> SweepResult:
    """
    Simulate ``template`` once per clearing duration (seconds after t_fault)

    ``threshold_index`` is the first unstable grid point. Non-monotone
    outcomes are reported with a warning rather than raised.
    """
    durations = [float(d) for d in durations]
    if any(b <= a for a, b in zip(durations, durations[1:])):
        raise ValueError("durations must be strictly increasing")
    thresholds = thresholds or StabilityThresholds()

    solution = power_flow(case, load_scale=template.load_scale)
    trajectories, labels = [], []
    for duration in durations:
        scenario = replace(template, t_clear=template.t_fault + duration,
                           id=f"{template.id or 'sweep'}-{int(round(duration * 1000))}ms")
        traj = integrate(stage_scenario(case, scenario, solution), cfg, verbose=False)
        trajectories.append(traj)
        labels.append(classify(traj, thresholds))

    unstable = [not label.is_stable for label in labels]
    threshold_index = unstable.index(True) if any(unstable) else None
    monotone = threshold_index is None or all(unstable[threshold_index:])
    if not monotone:
        print(f"[Sweep] Warning: non-monotone outcomes on {case.name}: "
              + ' '.join('U' if u else 'S' for u in unstable))
    return SweepResult(durations, trajectories, labels, threshold_index, monotone)
