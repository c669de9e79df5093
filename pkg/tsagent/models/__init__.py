"""Domain data models"""

from .grid import Bus, Line, Generator, GridCase, PowerFlowSolution, ReducedNetwork
from .scenario import (
    Scenario,
    SimulationConfig,
    Trajectory,
    StabilityThresholds,
    StabilityLabel,
    ViolationReport,
    ValidationIssue,
    CLASS_CODES,
    CLASS_NAMES,
)
from .architecture import (
    ArchitectureDescriptor,
    Requirements,
    SearchSpace,
    TrainReport,
    Metrics,
    HistoryRecord,
    History,
    Archive,
    SearchResult,
)

__all__ = [
    'Bus', 'Line', 'Generator', 'GridCase', 'PowerFlowSolution', 'ReducedNetwork',
    'Scenario', 'SimulationConfig', 'Trajectory', 'StabilityThresholds', 'StabilityLabel',
    'ViolationReport', 'ValidationIssue', 'CLASS_CODES', 'CLASS_NAMES',
    'ArchitectureDescriptor', 'Requirements', 'SearchSpace', 'TrainReport', 'Metrics',
    'HistoryRecord', 'History', 'Archive', 'SearchResult',
]
