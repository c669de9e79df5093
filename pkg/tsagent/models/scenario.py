"""Scenario, simulation and labeling data models"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

FAULT_KINDS = ('three_phase', 'slg', 'line_trip', 'gen_trip')
CLEARING_ACTIONS = ('remove_fault', 'trip_line')
LABEL_HINTS = ('stable', 'unstable')
BUS_FAULT_KINDS = ('three_phase', 'slg')

# Post-fault observation window in seconds
POST_FAULT_WINDOW = 5.0
DEFAULT_T_FAULT = 1.0

SCENARIO_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ValidationIssue:
    """One machine-readable problem with a scenario draft"""
    code: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.field}: {self.message}"

    def to_dict(self) -> Dict[str, str]:
        return asdict(self)


@dataclass(frozen=True)
class Scenario:
    """
    One disturbance experiment.

    ``location`` is a bus id for bus faults, a line id for line trips and a
    generator id for generator trips. Fault impedance is in ohms. Ordering and
    existence are checked against a case by ``sim.staging.check_scenario``.
    """
    fault_kind: str
    location: int
    t_clear: float
    t_fault: float = DEFAULT_T_FAULT
    r_f: float = 0.0
    x_f: float = 0.0
    clearing_action: str = 'remove_fault'
    trip_line: Optional[int] = None
    load_scale: float = 1.0
    horizon: Optional[float] = None
    label_hint: Optional[str] = None
    id: str = ''

    def __post_init__(self):
        if self.fault_kind not in FAULT_KINDS:
            raise ValueError(f"fault_kind must be one of {FAULT_KINDS}, got {self.fault_kind!r}")
        if self.clearing_action not in CLEARING_ACTIONS:
            raise ValueError(f"clearing_action must be one of {CLEARING_ACTIONS}, "
                             f"got {self.clearing_action!r}")
        for name in ('t_fault', 't_clear', 'r_f', 'x_f', 'load_scale'):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite number")
        if self.horizon is None:
            object.__setattr__(self, 'horizon', float(self.t_fault) + POST_FAULT_WINDOW)

    @property
    def clearing_duration(self) -> float:
        return self.t_clear - self.t_fault

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], scenario_id: str = '') -> 'Scenario':
        """
        Build a Scenario from a loosely typed mapping (LLM block or JSON file)

        Raises:
            ValueError: missing or mistyped fields
        """
        if not isinstance(raw, dict):
            raise ValueError("scenario must be a JSON object")
        data = dict(raw)
        impedance = data.pop('z_fault', None)
        if isinstance(impedance, dict):
            data.setdefault('r_f', impedance.get('r_f', 0.0))
            data.setdefault('x_f', impedance.get('x_f', 0.0))
        # clearing given as a duration in milliseconds
        if 't_clear' not in data and 'clearing_ms' in data:
            data['t_clear'] = float(data.get('t_fault', DEFAULT_T_FAULT)) + float(data['clearing_ms']) / 1000.0
        data.pop('clearing_ms', None)

        missing = [name for name in ('fault_kind', 'location', 't_clear') if name not in data]
        if missing:
            raise ValueError(f"missing field(s): {', '.join(missing)}")

        allowed = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ValueError(f"unknown field(s): {', '.join(unknown)}")

        def as_float(name: str) -> None:
            if name in data and data[name] is not None:
                value = data[name]
                if isinstance(value, bool):
                    raise ValueError(f"{name} must be a number")
                try:
                    data[name] = float(value)
                except (TypeError, ValueError):
                    raise ValueError(f"{name} must be a number, got {value!r}")

        for name in ('t_fault', 't_clear', 'r_f', 'x_f', 'load_scale', 'horizon'):
            as_float(name)
        for name in ('location', 'trip_line'):
            if name in data and data[name] is not None:
                value = data[name]
                is_number = isinstance(value, (int, float)) and not isinstance(value, bool)
                if not is_number or not math.isfinite(value) or not float(value).is_integer():
                    raise ValueError(f"{name} must be an integer id, got {value!r}")
                data[name] = int(value)
        if scenario_id:
            data['id'] = scenario_id
        if data.get('fault_kind') == 'line_trip':
            data.setdefault('clearing_action', 'trip_line')
        return cls(**data)


@dataclass(frozen=True)
class SimulationConfig:
    """Integrator settings"""
    dt: float = 1e-3
    output_points: int = 101
    method: str = 'rk4'
    divergence_cap: float = 3.0 * math.pi
    window: str = 'post_fault'

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.output_points < 2:
            raise ValueError("output_points must be at least 2")
        if self.method != 'rk4':
            raise ValueError("only the 'rk4' method is supported")
        if self.window not in ('post_fault', 'full'):
            raise ValueError("window must be 'post_fault' or 'full'")
        if not self.divergence_cap > 0:
            raise ValueError("divergence_cap must be positive")


@dataclass
class Trajectory:
    """
    Time-sampled system response.

    ``t`` is time since the start of the output window; ``fault_window`` is the
    fault-on interval expressed in the same time base.
    """
    t: np.ndarray
    delta: np.ndarray
    omega: np.ndarray
    v_mag: np.ndarray
    f_coi: np.ndarray
    converged: bool
    gen_ids: Tuple[int, ...]
    bus_ids: Tuple[int, ...]
    inertia: np.ndarray
    f0: float
    in_service: Optional[np.ndarray] = None
    fault_window: Tuple[float, float] = (0.0, 0.0)
    window_start: float = 0.0
    abort_time: Optional[float] = None
    scenario: Optional[Scenario] = None
    case_name: str = ''

    def __post_init__(self):
        n_gen, n_pts = self.delta.shape
        if self.omega.shape != (n_gen, n_pts):
            raise ValueError("omega shape must match delta")
        if self.v_mag.shape[1] != n_pts or self.f_coi.shape != (n_pts,) or self.t.shape != (n_pts,):
            raise ValueError("all channels must share the sample axis")
        if len(self.gen_ids) != n_gen or len(self.bus_ids) != self.v_mag.shape[0]:
            raise ValueError("id tuples must match channel counts")
        if self.in_service is None:
            self.in_service = np.ones(n_gen, dtype=bool)

    @property
    def n_points(self) -> int:
        return self.t.shape[0]

    def delta_coi(self) -> np.ndarray:
        """Angles relative to the inertia-weighted centre of in-service machines"""
        mask = self.in_service
        weights = self.inertia * mask
        center = weights @ self.delta / weights.sum()
        return self.delta - center[None, :]


@dataclass(frozen=True)
class StabilityThresholds:
    """Bounds for the angle, voltage and frequency criteria"""
    angle_max: float = 180.0
    v_min: float = 0.8
    v_max: float = 1.2
    df_max: float = 2.0
    v_dwell: float = 0.5

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be below v_max")
        if not self.df_max > 0:
            raise ValueError("df_max must be positive")
        if not self.angle_max > 0:
            raise ValueError("angle_max must be positive")
        if self.v_dwell < 0:
            raise ValueError("v_dwell must be non-negative")

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Optional[Dict[str, Any]]) -> 'StabilityThresholds':
        raw = raw or {}
        return cls(**{k: float(v) for k, v in raw.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class ViolationReport:
    """Outcome of one stability criterion"""
    criterion: str
    violated: bool
    time: Optional[float] = None
    detail: Dict[str, Any] = field(default_factory=dict)


# Multiclass codes; the mapping is written into dataset metadata
CLASS_CODES = {'stable': 0, 'angle': 1, 'voltage': 2, 'frequency': 3}
CLASS_NAMES = {code: name for name, code in CLASS_CODES.items()}


@dataclass(frozen=True)
class StabilityLabel:
    binary: str
    multiclass: int
    violated: Dict[str, float]
    reports: Tuple[ViolationReport, ...] = ()

    @property
    def is_stable(self) -> bool:
        return self.binary == 'stable'

    @property
    def binary_code(self) -> int:
        return 0 if self.is_stable else 1

    def describe(self) -> str:
        if self.is_stable:
            return "stable"
        parts = [f"{name} at t={time:.3f}s" for name, time in sorted(self.violated.items(), key=lambda kv: kv[1])]
        return f"unstable ({CLASS_NAMES[self.multiclass]}): " + ', '.join(parts)


def issues_to_text(issues: List[ValidationIssue]) -> str:
    return '\n'.join(f"- {issue}" for issue in issues)
