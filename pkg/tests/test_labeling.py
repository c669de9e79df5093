"""Tests for the angle, voltage and frequency criteria and the combined label."""

import itertools

import numpy as np
import pytest

from tsagent.core import PRIORITY, check_angle, check_frequency, check_voltage, classify
from tsagent.models.scenario import CLASS_CODES, StabilityThresholds, Trajectory

THRESHOLDS = StabilityThresholds()


def make_traj(delta_deg=None, v=None, f=None, n_points=101, horizon=5.0,
              fault_window=(0.0, 0.0), in_service=None, f0=60.0):
    t = np.linspace(0.0, horizon, n_points)
    delta = np.radians(np.zeros((2, n_points)) if delta_deg is None else np.asarray(delta_deg, dtype=float))
    n_gen = delta.shape[0]
    v_mag = np.ones((3, n_points)) if v is None else np.asarray(v, dtype=float)
    f_coi = np.full(n_points, f0) if f is None else np.asarray(f, dtype=float)
    return Trajectory(
        t=t, delta=delta, omega=np.zeros_like(delta), v_mag=v_mag, f_coi=f_coi, converged=True,
        gen_ids=tuple(range(1, n_gen + 1)), bus_ids=tuple(range(1, v_mag.shape[0] + 1)),
        inertia=np.ones(n_gen), f0=f0,
        in_service=None if in_service is None else np.asarray(in_service, dtype=bool),
        fault_window=fault_window,
    )


def scan_angle(traj, thresholds):
    delta = np.degrees(traj.delta)
    live = [g for g in range(delta.shape[0]) if traj.in_service[g]]
    for k in range(traj.n_points):
        for a, b in itertools.combinations(live, 2):
            if abs(delta[a, k] - delta[b, k]) >= thresholds.angle_max:
                return traj.t[k]
    return None


def scan_voltage(traj, thresholds):
    start, end = traj.fault_window
    best = None
    for b in range(traj.v_mag.shape[0]):
        run_start = None
        for k in range(traj.n_points):
            in_fault = start - 1e-9 <= traj.t[k] < end - 1e-9
            out = not thresholds.v_min <= traj.v_mag[b, k] <= thresholds.v_max
            if in_fault or not out:
                run_start = None
                continue
            if run_start is None:
                run_start = traj.t[k]
            if traj.t[k] - run_start >= thresholds.v_dwell - 1e-9:
                if best is None or traj.t[k] < best:
                    best = traj.t[k]
                break
    return best


def scan_frequency(traj, thresholds):
    for k in range(traj.n_points):
        if abs(traj.f_coi[k] - traj.f0) > thresholds.df_max:
            return traj.t[k]
    return None


class TestAngle:
    def test_stable_small_swing(self):
        delta = [[0.0] * 101, [30.0] * 101]
        report = check_angle(make_traj(delta), THRESHOLDS)
        assert not report.violated
        assert report.detail['max_spread_deg'] == pytest.approx(30.0)

    def test_first_violation_time(self):
        delta = np.zeros((3, 101))
        delta[2, 40:] = 190.0
        report = check_angle(make_traj(delta), THRESHOLDS)
        assert report.violated
        assert report.time == pytest.approx(2.0)
        assert report.detail['pair'] == (3, 1)

    def test_out_of_service_machine_ignored(self):
        delta = np.zeros((3, 101))
        delta[2] = 400.0
        report = check_angle(make_traj(delta, in_service=[True, True, False]), THRESHOLDS)
        assert not report.violated

    def test_single_machine_in_service(self):
        report = check_angle(make_traj(np.zeros((2, 101)), in_service=[True, False]), THRESHOLDS)
        assert not report.violated
        assert 'reason' in report.detail


class TestVoltage:
    def test_dip_during_fault_only_is_ignored(self):
        v = np.ones((3, 101))
        v[1, :3] = 0.6
        traj = make_traj(v=v, fault_window=(0.0, 0.15))
        assert not check_voltage(traj, THRESHOLDS).violated

    def test_sustained_dip_violates_after_dwell(self):
        v = np.ones((3, 101))
        v[0, 20:] = 0.7
        report = check_voltage(make_traj(v=v), THRESHOLDS)
        assert report.violated
        # dwell of 0.5 s on a 50 ms grid from t=1.0
        assert report.time == pytest.approx(1.5)
        assert report.detail['bus'] == 1

    def test_short_dip_does_not_violate(self):
        v = np.ones((3, 101))
        v[2, 20:25] = 0.7
        assert not check_voltage(make_traj(v=v), THRESHOLDS).violated

    def test_overvoltage(self):
        v = np.ones((3, 101))
        v[1, 60:] = 1.3
        report = check_voltage(make_traj(v=v), THRESHOLDS)
        assert report.violated
        assert report.detail['v_max'] == pytest.approx(1.3)


class TestFrequency:
    def test_deviation_above_limit(self):
        f = np.full(101, 60.0)
        f[30:] = 62.5
        report = check_frequency(make_traj(f=f), THRESHOLDS)
        assert report.violated
        assert report.time == pytest.approx(1.5)

    def test_deviation_at_limit_is_allowed(self):
        f = np.full(101, 62.0)
        assert not check_frequency(make_traj(f=f), THRESHOLDS).violated


class TestClassify:
    def test_stable(self):
        label = classify(make_traj())
        assert label.binary == 'stable'
        assert label.multiclass == CLASS_CODES['stable']
        assert label.violated == {}
        assert label.describe() == 'stable'

    def test_earliest_criterion_wins(self):
        f = np.full(101, 60.0)
        f[10:] = 65.0
        delta = np.zeros((2, 101))
        delta[1, 50:] = 200.0
        label = classify(make_traj(delta, f=f))
        assert label.binary == 'unstable'
        assert label.multiclass == CLASS_CODES['frequency']
        assert set(label.violated) == {'angle', 'frequency'}

    def test_tie_resolved_by_priority(self):
        assert PRIORITY[0] == 'angle'
        f = np.full(101, 60.0)
        f[50:] = 65.0
        delta = np.zeros((2, 101))
        delta[1, 50:] = 200.0
        label = classify(make_traj(delta, f=f))
        assert label.multiclass == CLASS_CODES['angle']
        assert 'angle at t=2.500s' in label.describe()

    def test_custom_thresholds(self):
        delta = [[0.0] * 101, [100.0] * 101]
        assert classify(make_traj(delta)).is_stable
        assert not classify(make_traj(delta), StabilityThresholds(angle_max=90.0)).is_stable

    def test_randomized_agreement_with_exhaustive_scan(self):
        rng = np.random.default_rng(1234)
        for _ in range(300):
            n_gen = int(rng.integers(2, 5))
            delta = np.cumsum(rng.normal(0.0, 12.0, size=(n_gen, 101)), axis=1)
            v = 1.0 + np.cumsum(rng.normal(0.0, 0.03, size=(3, 101)), axis=1)
            f = 60.0 + np.cumsum(rng.normal(0.0, 0.2, size=101))
            in_service = rng.random(n_gen) > 0.2
            fault_end = float(rng.choice([0.0, 0.1, 0.25]))
            traj = make_traj(delta, v=v, f=f, in_service=in_service, fault_window=(0.0, fault_end))

            label = classify(traj, THRESHOLDS)
            expected = {
                'angle': scan_angle(traj, THRESHOLDS) if in_service.sum() >= 2 else None,
                'voltage': scan_voltage(traj, THRESHOLDS),
                'frequency': scan_frequency(traj, THRESHOLDS),
            }
            expected = {k: v for k, v in expected.items() if v is not None}
            assert label.violated.keys() == expected.keys()
            for name, time in expected.items():
                assert label.violated[name] == pytest.approx(time)
            if expected:
                earliest = min(expected.values())
                winner = next(name for name in PRIORITY
                              if name in expected and expected[name] <= earliest + 1e-9)
                assert label.multiclass == CLASS_CODES[winner]
            else:
                assert label.is_stable
