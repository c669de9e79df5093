"""Newton-Raphson power flow in polar coordinates"""

import numpy as np

from ..errors import PowerFlowError
from ..models.grid import GridCase, PowerFlowSolution
from .network import bus_admittance

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 30

# Voltage magnitudes beyond this are treated as numerical blow-up
_VM_LIMIT = 10.0


def scheduled_injections(case: GridCase, load_scale: float = 1.0):
    """
    Net scheduled (P, Q) per bus; loads and non-slack dispatch scale together
    """
    n = case.n_bus
    p_gen = np.zeros(n)
    slack_id = case.slack_bus.id
    for gen in case.generators:
        k = case.bus_index[gen.bus]
        scale = 1.0 if gen.bus == slack_id else load_scale
        p_gen[k] += gen.p_dispatch * scale
    p_load = np.array([bus.p_load for bus in case.buses]) * load_scale
    q_load = np.array([bus.q_load for bus in case.buses]) * load_scale
    return p_gen - p_load, -q_load


def _power_derivatives(y: np.ndarray, v: np.ndarray):
    """Partial derivatives of complex bus injections w.r.t. angle and magnitude"""
    current = y @ v
    diag_v = np.diag(v)
    diag_i = np.diag(current)
    diag_vnorm = np.diag(v / np.abs(v))
    ds_dvm = diag_v @ np.conj(y @ diag_vnorm) + np.conj(diag_i) @ diag_vnorm
    ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
    return ds_dva, ds_dvm


def power_flow(case: GridCase, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
               load_scale: float = 1.0) -> PowerFlowSolution:
    """
    Solve the pre-disturbance operating point from a flat start

    ``iterations`` counts mismatch evaluations, so a case that is already
    balanced at the flat start reports 1.

    Raises:
        PowerFlowError: the Jacobian is singular
    """
    if not load_scale > 0:
        raise ValueError("load_scale must be positive")

    y = bus_admittance(case)
    p_spec, q_spec = scheduled_injections(case, load_scale)

    kinds = [bus.kind for bus in case.buses]
    pv = [k for k, kind in enumerate(kinds) if kind == 'pv']
    pq = [k for k, kind in enumerate(kinds) if kind == 'pq']
    pvpq = pv + pq

    vm = np.array([bus.v_setpoint if bus.kind != 'pq' else 1.0 for bus in case.buses])
    va = np.zeros(case.n_bus)

    converged = False
    mismatch_norm = np.inf
    iteration = 0
    for iteration in range(1, max_iter + 1):
        v = vm * np.exp(1j * va)
        s_calc = v * np.conj(y @ v)
        mismatch = np.concatenate([p_spec[pvpq] - s_calc.real[pvpq], q_spec[pq] - s_calc.imag[pq]])
        mismatch_norm = float(np.max(np.abs(mismatch))) if mismatch.size else 0.0
        if not np.isfinite(mismatch_norm):
            break
        if mismatch_norm <= tol:
            converged = True
            break
        if iteration == max_iter:
            break

        ds_dva, ds_dvm = _power_derivatives(y, v)
        jac = np.block([
            [ds_dva.real[np.ix_(pvpq, pvpq)], ds_dvm.real[np.ix_(pvpq, pq)]],
            [ds_dva.imag[np.ix_(pq, pvpq)], ds_dvm.imag[np.ix_(pq, pq)]],
        ])
        try:
            step = np.linalg.solve(jac, mismatch)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError(f"singular Jacobian at iteration {iteration} ({exc})")

        va[pvpq] += step[:len(pvpq)]
        vm[pq] += step[len(pvpq):]
        if np.any(vm <= 0) or np.any(vm > _VM_LIMIT) or not np.all(np.isfinite(va)):
            print(f"[PowerFlow] Voltage estimate left the physical range at iteration {iteration}")
            break

    v = vm * np.exp(1j * va)
    s_bus = v * np.conj(y @ v)
    # mismatch of the returned state
    final = np.concatenate([p_spec[pvpq] - s_bus.real[pvpq], q_spec[pq] - s_bus.imag[pq]])
    mismatch_norm = float(np.max(np.abs(final))) if final.size else 0.0
    if not np.isfinite(mismatch_norm):
        mismatch_norm = float('inf')
    if not converged:
        print(f"[PowerFlow] {case.name}: no convergence after {iteration} iterations "
              f"(mismatch {mismatch_norm:.3e} pu, load_scale {load_scale:g})")
    return PowerFlowSolution(
        v_mag=vm.copy(),
        v_ang=va.copy(),
        p_inj=s_bus.real,
        q_inj=s_bus.imag,
        converged=converged,
        iterations=iteration,
        max_mismatch=mismatch_norm,
        load_scale=load_scale,
    )
