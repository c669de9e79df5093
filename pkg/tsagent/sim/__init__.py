"""Time-domain simulation of the classical multi-machine model"""

from .staging import (
    StagedScenario,
    check_scenario,
    electrical_power,
    machine_emf,
    stage_operating_point,
    stage_scenario,
)
from .integrator import integrate, simulate
from .sweep import SweepResult, critical_clearing_sweep

__all__ = [
    'StagedScenario', 'check_scenario', 'stage_scenario', 'stage_operating_point', 'machine_emf',
    'electrical_power', 'integrate', 'simulate',
    'SweepResult', 'critical_clearing_sweep',
]
