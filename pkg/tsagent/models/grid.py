"""Network data models: buses, lines, generators, cases and solved states"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

BUS_KINDS = ('slack', 'pv', 'pq')


@dataclass(frozen=True)
class Bus:
    """A network node; loads are per unit on the system base"""
    id: int
    kind: str
    base_kv: float
    v_setpoint: float = 1.0
    p_load: float = 0.0
    q_load: float = 0.0

    def __post_init__(self):
        if self.kind not in BUS_KINDS:
            raise ValueError(f"bus {self.id}: kind must be one of {BUS_KINDS}, got {self.kind!r}")
        if not self.base_kv > 0:
            raise ValueError(f"bus {self.id}: base_kv must be positive")
        if not math.isfinite(self.p_load) or not math.isfinite(self.q_load):
            raise ValueError(f"bus {self.id}: p_load and q_load must be finite")
        if not self.v_setpoint > 0:
            raise ValueError(f"bus {self.id}: v_setpoint must be positive")


@dataclass(frozen=True)
class Line:
    """A pi-model branch; ``tap`` is an off-nominal ratio on the from side"""
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_shunt: float = 0.0
    tap: float = 1.0
    in_service: bool = True

    def __post_init__(self):
        if self.x == 0:
            raise ValueError(f"line {self.id}: x must be non-zero")
        if self.from_bus == self.to_bus:
            raise ValueError(f"line {self.id}: from and to bus are both {self.from_bus}")
        if not self.tap > 0:
            raise ValueError(f"line {self.id}: tap must be positive")

    @property
    def series_admittance(self) -> complex:
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class Generator:
    """Classical machine; h, d and xdp are on the machine base ``mbase``"""
    id: int
    bus: int
    p_dispatch: float
    h: float
    xdp: float
    mbase: float
    d: float = 0.0
    q_limits: Tuple[float, float] = (-9999.0, 9999.0)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"generator {self.id}: h must be positive")
        if not self.xdp > 0:
            raise ValueError(f"generator {self.id}: xdp must be positive")
        if not self.mbase > 0:
            raise ValueError(f"generator {self.id}: mbase must be positive")
        if self.d < 0:
            raise ValueError(f"generator {self.id}: damping must be non-negative")

    def on_system_base(self, sbase: float) -> Tuple[float, float, float]:
        """Return (H, D, X'd) converted from machine base to system base"""
        ratio = self.mbase / sbase
        return self.h * ratio, self.d * ratio, self.xdp / ratio


@dataclass(frozen=True)
class GridCase:
    """Static network description"""
    name: str
    f0: float
    sbase: float
    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...]
    generators: Tuple[Generator, ...]
    bus_index: Dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.f0 > 0 or not self.sbase > 0:
            raise ValueError("f0 and sbase must be positive")
        index = {bus.id: k for k, bus in enumerate(self.buses)}
        if len(index) != len(self.buses):
            raise ValueError("bus ids must be unique")
        object.__setattr__(self, 'bus_index', index)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def omega_s(self) -> float:
        return 2.0 * math.pi * self.f0

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index[bus_id]]

    def line(self, line_id: int) -> Line:
        for line in self.lines:
            if line.id == line_id:
                return line
        raise KeyError(line_id)

    def generator(self, gen_id: int) -> Generator:
        for gen in self.generators:
            if gen.id == gen_id:
                return gen
        raise KeyError(gen_id)

    def has_bus(self, bus_id: int) -> bool:
        return bus_id in self.bus_index

    def has_line(self, line_id: int) -> bool:
        return any(line.id == line_id for line in self.lines)

    def has_generator(self, gen_id: int) -> bool:
        return any(gen.id == gen_id for gen in self.generators)

    @property
    def slack_bus(self) -> Bus:
        return next(bus for bus in self.buses if bus.kind == 'slack')

    def machine_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(H, D, X'd) for every generator on the system base"""
        values = np.array([gen.on_system_base(self.sbase) for gen in self.generators], dtype=float)
        return values[:, 0], values[:, 1], values[:, 2]

    def describe(self) -> str:
        """One-paragraph summary used in prompts"""
        gen_buses = ', '.join(str(gen.bus) for gen in self.generators)
        total_load = sum(bus.p_load for bus in self.buses) * self.sbase
        return (f"{self.name}: {self.n_bus} buses, {len(self.lines)} lines, "
                f"{self.n_gen} generators (at buses {gen_buses}), "
                f"{self.f0:g} Hz, total load {total_load:.1f} MW on a {self.sbase:g} MVA base")


@dataclass(frozen=True)
class PowerFlowSolution:
    """Solved operating point; injections are net (generation minus load)"""
    v_mag: np.ndarray
    v_ang: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    converged: bool
    iterations: int
    max_mismatch: float
    load_scale: float = 1.0

    @property
    def voltage(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)


@dataclass(frozen=True)
class ReducedNetwork:
    """Admittance seen from the kept (generator internal) nodes"""
    y_red: np.ndarray
    recovery: np.ndarray
    keep: Tuple[int, ...]
    eliminated: Tuple[int, ...]
    gen_emf: Optional[np.ndarray] = None
