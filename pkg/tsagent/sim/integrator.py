"""Fixed-step RK4 integration of the classical multi-machine swing equations"""

import math
from typing import Optional

import numpy as np

from ..errors import StagingError
from ..models.grid import GridCase
from ..models.scenario import Scenario, SimulationConfig, Trajectory
from .staging import StagedScenario, electrical_power, stage_scenario


def _coi(values: np.ndarray, weights: np.ndarray) -> float:
    return float(weights @ values / weights.sum())


def integrate(staged: StagedScenario, cfg: Optional[SimulationConfig] = None,
              delta_offset: Optional[np.ndarray] = None, verbose: bool = True) -> Trajectory:
    """
    Integrate from t = 0 to the staged horizon and sample the output window

    Switching instants and sample instants are integration breakpoints, so
    each segment uses a single network. The run aborts once any in-service
    angle leaves the COI by more than ``cfg.divergence_cap``; later samples
    repeat the last state.
    """
    cfg = cfg or SimulationConfig()
    case = staged.case
    inertia, damping, _ = case.machine_arrays()
    two_h = 2.0 * inertia
    omega_s = case.omega_s

    horizon = staged.horizon
    window_start = staged.t_fault if cfg.window == 'post_fault' else 0.0
    if not horizon > window_start:
        raise StagingError(f"horizon {horizon} must exceed the window start {window_start}")
    sample_times = np.linspace(window_start, horizon, cfg.output_points)
    breakpoints = np.unique(np.concatenate([[0.0], sample_times, staged.event_times]))
    sample_index = {float(t): k for k, t in enumerate(sample_times)}

    delta = staged.delta0.copy()
    if delta_offset is not None:
        delta = delta + np.asarray(delta_offset, dtype=float)
    omega = np.zeros(case.n_gen)
    emf = staged.emf
    pm = staged.pm

    n_pts = cfg.output_points
    out_delta = np.zeros((case.n_gen, n_pts))
    out_omega = np.zeros((case.n_gen, n_pts))
    out_v = np.zeros((case.n_bus, n_pts))
    out_f = np.zeros(n_pts)

    def record(k: int, t: float):
        net = staged.network_at(t)
        mask = staged.in_service_at(t)
        out_delta[:, k] = delta
        out_omega[:, k] = omega
        phasor = emf * np.exp(1j * delta)
        out_v[:, k] = np.abs(net.recovery @ phasor)
        out_f[k] = case.f0 * (1.0 + _coi(omega, inertia * mask))

    def derivatives(d, w, net, mask):
        pe = electrical_power(d, emf, net)
        dd = omega_s * w
        dw = (pm - pe - damping * w) / two_h
        return dd * mask, dw * mask

    converged = True
    abort_time = None
    filled = 0
    if 0.0 in sample_index:
        record(0, 0.0)
        filled = 1

    for t0, t1 in zip(breakpoints[:-1], breakpoints[1:]):
        span = t1 - t0
        mid = 0.5 * (t0 + t1)
        net = staged.network_at(mid)
        mask = staged.in_service_at(mid).astype(float)
        steps = max(1, int(math.ceil(span / cfg.dt - 1e-9)))
        h = span / steps
        for step in range(steps):
            k1d, k1w = derivatives(delta, omega, net, mask)
            k2d, k2w = derivatives(delta + 0.5 * h * k1d, omega + 0.5 * h * k1w, net, mask)
            k3d, k3w = derivatives(delta + 0.5 * h * k2d, omega + 0.5 * h * k2w, net, mask)
            k4d, k4w = derivatives(delta + h * k3d, omega + h * k3w, net, mask)
            delta = delta + h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
            omega = omega + h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)

            weights = inertia * mask
            if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(omega))):
                converged = False
            else:
                spread = np.abs(delta - _coi(delta, weights)) * mask
                converged = bool(spread.max() <= cfg.divergence_cap)
            if not converged:
                abort_time = t0 + (step + 1) * h
                break
        if not converged:
            break
        k = sample_index.get(float(t1))
        if k is not None:
            record(k, float(t1))
            filled = k + 1

    if not converged:
        if verbose:
            print(f"[Simulate] Run diverged at t={abort_time:.3f}s; holding the last sample")
        if filled == 0:
            delta = np.nan_to_num(delta)
            omega = np.nan_to_num(omega)
            record(0, window_start)
            filled = 1
        for k in range(filled, n_pts):
            out_delta[:, k] = out_delta[:, filled - 1]
            out_omega[:, k] = out_omega[:, filled - 1]
            out_v[:, k] = out_v[:, filled - 1]
            out_f[k] = out_f[filled - 1]

    fault_window = (max(staged.t_fault, window_start) - window_start,
                    max(staged.t_clear, window_start) - window_start)
    scenario = staged.scenario
    return Trajectory(
        t=sample_times - window_start,
        delta=out_delta,
        omega=out_omega,
        v_mag=out_v,
        f_coi=out_f,
        converged=converged,
        gen_ids=tuple(gen.id for gen in case.generators),
        bus_ids=tuple(bus.id for bus in case.buses),
        inertia=inertia.copy(),
        f0=case.f0,
        in_service=staged.in_service_post.copy(),
        fault_window=fault_window,
        window_start=window_start,
        abort_time=None if abort_time is None else abort_time - window_start,
        scenario=scenario,
        case_name=case.name,
    )


def simulate(case: GridCase, scenario: Scenario, cfg: Optional[SimulationConfig] = None,
             verbose: bool = True) -> Trajectory:
    """Stage and integrate one scenario"""
    return integrate(stage_scenario(case, scenario), cfg, verbose=verbose)
