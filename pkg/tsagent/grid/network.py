"""
Admittance construction, network overlays and Kron reduction.

Node order in the extended matrix: every bus in case order, then one
internal node per generator in case order.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..errors import NetworkError
from ..models.grid import GridCase, PowerFlowSolution, ReducedNetwork

# Bolted faults are represented by this reactance (pu)
MIN_FAULT_IMPEDANCE = 1e-6
# SLG faults use a larger impedance than the equivalent three-phase fault
SLG_IMPEDANCE_FACTOR = 10.0
# Y_LL condition numbers above this are treated as singular
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class FaultShunt:
    """Shunt admittance (pu) added at a bus"""
    bus: int
    admittance: complex


@dataclass(frozen=True)
class RemoveLine:
    line_id: int


@dataclass(frozen=True)
class RemoveGenerator:
    gen_id: int


@dataclass(frozen=True)
class ScaleLoads:
    factor: float


def _aggregate(case: GridCase, overlays: Iterable):
    """Collapse overlays into order-independent totals"""
    shunts = np.zeros(case.n_bus, dtype=complex)
    removed_lines = set()
    removed_gens = set()
    load_factor = 1.0
    for overlay in overlays:
        if isinstance(overlay, FaultShunt):
            if not case.has_bus(overlay.bus):
                raise NetworkError(f"fault overlay on unknown bus {overlay.bus}")
            shunts[case.bus_index[overlay.bus]] += overlay.admittance
        elif isinstance(overlay, RemoveLine):
            if not case.has_line(overlay.line_id):
                raise NetworkError(f"removal of unknown line {overlay.line_id}")
            removed_lines.add(overlay.line_id)
        elif isinstance(overlay, RemoveGenerator):
            if not case.has_generator(overlay.gen_id):
                raise NetworkError(f"removal of unknown generator {overlay.gen_id}")
            removed_gens.add(overlay.gen_id)
        elif isinstance(overlay, ScaleLoads):
            if not overlay.factor > 0:
                raise NetworkError(f"load scale must be positive, got {overlay.factor}")
            load_factor *= overlay.factor
        else:
            raise NetworkError(f"unsupported overlay {overlay!r}")
    if len(removed_gens) == case.n_gen:
        raise NetworkError("overlays remove every generator")
    return shunts, removed_lines, removed_gens, load_factor


def _stamp_lines(y: np.ndarray, case: GridCase, removed_lines=frozenset()) -> None:
    for line in case.lines:
        if not line.in_service or line.id in removed_lines:
            continue
        f = case.bus_index[line.from_bus]
        t = case.bus_index[line.to_bus]
        ys = line.series_admittance
        half_b = 0.5j * line.b_shunt
        y[f, f] += (ys + half_b) / line.tap ** 2
        y[t, t] += ys + half_b
        y[f, t] -= ys / line.tap
        y[t, f] -= ys / line.tap


def bus_admittance(case: GridCase) -> np.ndarray:
    """Bus admittance matrix of the branch network alone"""
    y = np.zeros((case.n_bus, case.n_bus), dtype=complex)
    _stamp_lines(y, case)
    return y


def build_admittance(case: GridCase, overlays: Sequence = (),
                     solution: Optional[PowerFlowSolution] = None) -> np.ndarray:
    """
    Extended admittance over buses plus generator internal nodes

    Loads become constant admittances (P - jQ)/|V|^2 at the solved voltage
    (unit voltage when no solution is given). Removed generators keep their
    internal node with an empty row.

    Raises:
        NetworkError: an overlay references a missing element or removes
            every generator
    """
    shunts, removed_lines, removed_gens, load_factor = _aggregate(case, overlays)
    n_bus, n_gen = case.n_bus, case.n_gen
    y = np.zeros((n_bus + n_gen, n_bus + n_gen), dtype=complex)
    _stamp_lines(y, case, removed_lines)

    base_scale = solution.load_scale if solution is not None else 1.0
    v_mag = solution.v_mag if solution is not None else np.ones(n_bus)
    for k, bus in enumerate(case.buses):
        load = complex(bus.p_load, -bus.q_load) * base_scale * load_factor
        y[k, k] += load / v_mag[k] ** 2 + shunts[k]

    _, _, xdp = case.machine_arrays()
    for g, gen in enumerate(case.generators):
        if gen.id in removed_gens:
            continue
        node = n_bus + g
        k = case.bus_index[gen.bus]
        yg = 1.0 / (1j * xdp[g])
        y[node, node] += yg
        y[k, k] += yg
        y[node, k] -= yg
        y[k, node] -= yg
    return y


def internal_nodes(case: GridCase) -> Tuple[int, ...]:
    return tuple(range(case.n_bus, case.n_bus + case.n_gen))


def kron_reduce(y: np.ndarray, keep: Sequence[int]) -> ReducedNetwork:
    """
    Eliminate every node not in ``keep``

    y_red = Y_kk - Y_ke Y_ee^-1 Y_ek and recovery = -Y_ee^-1 Y_ek, so the
    eliminated voltages follow from recovery @ v_keep.

    Raises:
        NetworkError: Y_ee is singular (the message carries the condition estimate)
    """
    y = np.asarray(y, dtype=complex)
    n = y.shape[0]
    keep = tuple(int(k) for k in keep)
    if len(set(keep)) != len(keep) or any(k < 0 or k >= n for k in keep):
        raise NetworkError(f"keep indices must be unique and within 0..{n - 1}")
    kept = set(keep)
    eliminated = tuple(k for k in range(n) if k not in kept)

    y_kk = y[np.ix_(keep, keep)]
    if not eliminated:
        return ReducedNetwork(y_red=y_kk.copy(), recovery=np.zeros((0, len(keep)), dtype=complex),
                              keep=keep, eliminated=())

    y_ke = y[np.ix_(keep, eliminated)]
    y_ek = y[np.ix_(eliminated, keep)]
    y_ee = y[np.ix_(eliminated, eliminated)]
    condition = np.linalg.cond(y_ee)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise NetworkError(f"eliminated block is singular (condition estimate {condition:.3e})")

    lu = scipy.linalg.lu_factor(y_ee)
    recovery = -scipy.linalg.lu_solve(lu, y_ek)
    y_red = y_kk + y_ke @ recovery
    return ReducedNetwork(y_red=y_red, recovery=recovery, keep=keep, eliminated=eliminated)


def fault_admittance(case: GridCase, bus_id: int, r_f: float, x_f: float,
                     kind: str = 'three_phase') -> complex:
    """Convert a fault impedance in ohms into a per-unit shunt admittance"""
    bus = case.bus(bus_id)
    z_base = bus.base_kv ** 2 / case.sbase
    z = complex(r_f, x_f) / z_base
    if abs(z) < MIN_FAULT_IMPEDANCE:
        z = complex(0.0, MIN_FAULT_IMPEDANCE)
    if kind == 'slg':
        z *= SLG_IMPEDANCE_FACTOR
    return 1.0 / z
