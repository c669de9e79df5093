"""Turn a Scenario into switched reduced networks and initial machine states"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import networkx as nx
import numpy as np

from ..errors import NetworkError, PowerFlowError, StagingError
from ..grid.case_parser import case_graph
from ..grid.network import (
    FaultShunt,
    RemoveGenerator,
    RemoveLine,
    build_admittance,
    fault_admittance,
    internal_nodes,
    kron_reduce,
)
from ..grid.power_flow import power_flow
from ..models.grid import GridCase, PowerFlowSolution, ReducedNetwork
from ..models.scenario import BUS_FAULT_KINDS, LABEL_HINTS, Scenario, ValidationIssue

LOAD_SCALE_RANGE = (0.1, 2.0)
MAX_HORIZON = 60.0


@dataclass
class StagedScenario:
    """
    Networks and initial conditions for one simulation.

    Time is absolute: ``pre`` applies before ``t_fault``, ``fault_on`` until
    ``t_clear`` and ``post`` until ``horizon``.
    """
    case: GridCase
    solution: PowerFlowSolution
    pre: ReducedNetwork
    fault_on: ReducedNetwork
    post: ReducedNetwork
    emf: np.ndarray
    delta0: np.ndarray
    pm: np.ndarray
    t_fault: float
    t_clear: float
    horizon: float
    in_service_fault: np.ndarray
    in_service_post: np.ndarray
    scenario: Optional[Scenario] = None
    overlays: dict = field(default_factory=dict)

    def network_at(self, t: float) -> ReducedNetwork:
        if t < self.t_fault:
            return self.pre
        if t < self.t_clear:
            return self.fault_on
        return self.post

    def in_service_at(self, t: float) -> np.ndarray:
        if t < self.t_fault:
            return np.ones(self.case.n_gen, dtype=bool)
        if t < self.t_clear:
            return self.in_service_fault
        return self.in_service_post

    @property
    def event_times(self) -> Tuple[float, ...]:
        return tuple(t for t in (self.t_fault, self.t_clear) if 0.0 < t < self.horizon)


def _orphaned_buses(case: GridCase, removed_lines=(), removed_gens=()) -> List[int]:
    """Buses left in an island without any in-service generator"""
    lines = [line for line in case.lines if line.id not in set(removed_lines)]
    graph = case_graph(case.buses, lines)
    live = {gen.bus for gen in case.generators if gen.id not in set(removed_gens)}
    orphans = []
    for component in nx.connected_components(graph):
        if not component & live:
            orphans.extend(component)
    return sorted(orphans)


def check_scenario(scenario: Scenario, case: GridCase) -> List[ValidationIssue]:
    """
    Check a scenario against a case; an empty list means it can be staged
    """
    issues: List[ValidationIssue] = []
    kind = scenario.fault_kind

    if kind in BUS_FAULT_KINDS:
        if not case.has_bus(scenario.location):
            issues.append(ValidationIssue('unknown_bus', 'location',
                                          f"unknown bus {scenario.location} in case {case.name}"))
    elif kind == 'line_trip':
        if not case.has_line(scenario.location):
            issues.append(ValidationIssue('unknown_line', 'location',
                                          f"unknown line {scenario.location} in case {case.name}"))
        elif not case.line(scenario.location).in_service:
            issues.append(ValidationIssue('line_out_of_service', 'location',
                                          f"line {scenario.location} is already out of service"))
    elif kind == 'gen_trip':
        if not case.has_generator(scenario.location):
            issues.append(ValidationIssue('unknown_generator', 'location',
                                          f"unknown generator {scenario.location} in case {case.name}"))

    if kind in BUS_FAULT_KINDS and scenario.clearing_action == 'trip_line':
        if scenario.trip_line is None:
            issues.append(ValidationIssue('missing_trip_line', 'trip_line',
                                          "clearing_action 'trip_line' needs a trip_line id"))
        elif not case.has_line(scenario.trip_line):
            issues.append(ValidationIssue('unknown_line', 'trip_line',
                                          f"unknown line {scenario.trip_line} in case {case.name}"))
        elif case.has_bus(scenario.location):
            line = case.line(scenario.trip_line)
            if scenario.location not in (line.from_bus, line.to_bus):
                issues.append(ValidationIssue(
                    'line_not_adjacent', 'trip_line',
                    f"line {line.id} ({line.from_bus}-{line.to_bus}) does not touch bus {scenario.location}"))

    if scenario.t_fault < 0:
        issues.append(ValidationIssue('ordering', 't_fault', f"t_fault={scenario.t_fault} must be >= 0"))
    if not scenario.t_fault < scenario.t_clear:
        issues.append(ValidationIssue(
            'ordering', 't_clear',
            f"t_clear={scenario.t_clear} must be after t_fault={scenario.t_fault}"))
    if scenario.t_clear > scenario.horizon:
        issues.append(ValidationIssue(
            'ordering', 'horizon',
            f"t_clear={scenario.t_clear} exceeds horizon={scenario.horizon}"))
    if scenario.horizon > MAX_HORIZON:
        issues.append(ValidationIssue('range', 'horizon',
                                      f"horizon={scenario.horizon} exceeds {MAX_HORIZON} s"))

    if kind in BUS_FAULT_KINDS:
        for name in ('r_f', 'x_f'):
            if getattr(scenario, name) < 0:
                issues.append(ValidationIssue('impedance', name,
                                              f"{name}={getattr(scenario, name)} must be non-negative"))

    low, high = LOAD_SCALE_RANGE
    if not low <= scenario.load_scale <= high:
        issues.append(ValidationIssue('range', 'load_scale',
                                      f"load_scale={scenario.load_scale} outside [{low}, {high}]"))
    if scenario.label_hint is not None and scenario.label_hint not in LABEL_HINTS:
        issues.append(ValidationIssue('range', 'label_hint',
                                      f"label_hint={scenario.label_hint!r} must be 'stable', 'unstable' or null"))

    if not issues:
        removed_lines, removed_gens = _removals(scenario)
        orphans = _orphaned_buses(case, removed_lines, removed_gens)
        if len(removed_gens) >= case.n_gen:
            issues.append(ValidationIssue('islanding', 'location', "scenario removes every generator"))
        elif orphans:
            issues.append(ValidationIssue('islanding', 'location',
                                          f"scenario leaves buses {orphans} without a generator"))
    return issues


def _removals(scenario: Scenario):
    removed_lines, removed_gens = [], []
    if scenario.fault_kind == 'line_trip':
        removed_lines.append(scenario.location)
    elif scenario.fault_kind == 'gen_trip':
        removed_gens.append(scenario.location)
    elif scenario.clearing_action == 'trip_line' and scenario.trip_line is not None:
        removed_lines.append(scenario.trip_line)
    return removed_lines, removed_gens


def machine_emf(case: GridCase, solution: PowerFlowSolution) -> np.ndarray:
    """
    Internal EMF E = V + jX'd I of every machine

    Several machines on one bus share P by dispatch and Q by rating.
    """
    _, _, xdp = case.machine_arrays()
    v = solution.voltage
    s_bus = solution.p_inj + 1j * solution.q_inj
    loads = np.array([complex(bus.p_load, bus.q_load) for bus in case.buses]) * solution.load_scale
    s_gen_bus = s_bus + loads

    emf = np.zeros(case.n_gen, dtype=complex)
    for g, gen in enumerate(case.generators):
        k = case.bus_index[gen.bus]
        peers = [other for other in case.generators if other.bus == gen.bus]
        total_p = sum(other.p_dispatch for other in peers)
        p_share = gen.p_dispatch / total_p if total_p > 0 else 1.0 / len(peers)
        q_share = gen.mbase / sum(other.mbase for other in peers)
        s_g = complex(s_gen_bus[k].real * p_share, s_gen_bus[k].imag * q_share)
        current = np.conj(s_g / v[k])
        emf[g] = v[k] + 1j * xdp[g] * current
    return emf


def electrical_power(delta: np.ndarray, emf: np.ndarray, net: ReducedNetwork) -> np.ndarray:
    """
    Electrical power out of each internal node

    P_e,i = sum_j E_i E_j (G_ij cos(d_i - d_j) + B_ij sin(d_i - d_j))
    """
    phasor = np.abs(emf) * np.exp(1j * np.asarray(delta, dtype=float))
    return (phasor * np.conj(net.y_red @ phasor)).real


def _reduce(case: GridCase, overlays, solution: PowerFlowSolution) -> ReducedNetwork:
    try:
        return kron_reduce(build_admittance(case, overlays, solution), internal_nodes(case))
    except NetworkError as exc:
        raise StagingError(str(exc))


def _mask(case: GridCase, removed_gens) -> np.ndarray:
    return np.array([gen.id not in set(removed_gens) for gen in case.generators])


def stage_scenario(case: GridCase, scenario: Scenario,
                   solution: Optional[PowerFlowSolution] = None) -> StagedScenario:
    """
    Build pre-fault, fault-on and post-fault reduced networks

    Raises:
        StagingError: the scenario is invalid for the case, the power flow
            does not converge at its load level, or a network is singular
    """
    issues = check_scenario(scenario, case)
    if issues:
        raise StagingError('; '.join(str(issue) for issue in issues))

    if solution is None or solution.load_scale != scenario.load_scale:
        try:
            solution = power_flow(case, load_scale=scenario.load_scale)
        except PowerFlowError as exc:
            raise StagingError(f"power flow failed at load_scale {scenario.load_scale}: {exc}")
    if not solution.converged:
        raise StagingError(f"power flow did not converge at load_scale {scenario.load_scale} "
                           f"(mismatch {solution.max_mismatch:.3e} pu)")

    pre = _reduce(case, (), solution)
    kind = scenario.fault_kind
    if kind in BUS_FAULT_KINDS:
        shunt = FaultShunt(scenario.location,
                           fault_admittance(case, scenario.location, scenario.r_f, scenario.x_f, kind))
        fault_overlays = (shunt,)
        if scenario.clearing_action == 'trip_line':
            post_overlays = (RemoveLine(scenario.trip_line),)
        else:
            post_overlays = ()
        removed_fault, removed_post = (), ()
    elif kind == 'line_trip':
        fault_overlays = post_overlays = (RemoveLine(scenario.location),)
        removed_fault = removed_post = ()
    else:
        fault_overlays = post_overlays = (RemoveGenerator(scenario.location),)
        removed_fault = removed_post = (scenario.location,)

    fault_on = _reduce(case, fault_overlays, solution)
    post = pre if not post_overlays else (
        fault_on if post_overlays == fault_overlays else _reduce(case, post_overlays, solution))
    return _finish(case, solution, pre, fault_on, post, scenario.t_fault, scenario.t_clear,
                   scenario.horizon, _mask(case, removed_fault), _mask(case, removed_post), scenario,
                   {'fault_on': fault_overlays, 'post': post_overlays})


def stage_operating_point(case: GridCase, horizon: float = 5.0, load_scale: float = 1.0,
                          solution: Optional[PowerFlowSolution] = None) -> StagedScenario:
    """Undisturbed system: every interval uses the pre-fault network"""
    if solution is None:
        solution = power_flow(case, load_scale=load_scale)
    if not solution.converged:
        raise StagingError(f"power flow did not converge (mismatch {solution.max_mismatch:.3e} pu)")
    pre = _reduce(case, (), solution)
    full = np.ones(case.n_gen, dtype=bool)
    return _finish(case, solution, pre, pre, pre, 0.0, 0.0, horizon, full, full, None, {})


def _finish(case, solution, pre, fault_on, post, t_fault, t_clear, horizon,
            in_fault, in_post, scenario, overlays) -> StagedScenario:
    emf = machine_emf(case, solution)
    pre = ReducedNetwork(pre.y_red, pre.recovery, pre.keep, pre.eliminated, gen_emf=emf)
    pm = electrical_power(np.angle(emf), emf, pre)
    return StagedScenario(
        case=case, solution=solution, pre=pre, fault_on=fault_on, post=post,
        emf=np.abs(emf), delta0=np.angle(emf), pm=pm,
        t_fault=float(t_fault), t_clear=float(t_clear), horizon=float(horizon),
        in_service_fault=in_fault, in_service_post=in_post,
        scenario=scenario, overlays=overlays,
    )
