"""Tests for case parsing, admittance construction, Kron reduction and power flow."""

import copy
import importlib
import json

import numpy as np
import pytest

from tsagent.errors import CaseFormatError, NetworkError
from tsagent.grid import (
    FaultShunt,
    RemoveGenerator,
    RemoveLine,
    ScaleLoads,
    build_admittance,
    bus_admittance,
    fault_admittance,
    internal_nodes,
    kron_reduce,
    list_cases,
    load_case,
    parse_case,
    power_flow,
)
from tsagent.grid.case_parser import CASES_DIR
from tsagent.grid.network import MIN_FAULT_IMPEDANCE, SLG_IMPEDANCE_FACTOR
from tsagent.grid.power_flow import scheduled_injections


def _three_bus_doc():
    return json.loads((CASES_DIR / 'three_bus.json').read_text(encoding='utf-8'))


def _returned_mismatch(case, pf):
    """Largest P/Q mismatch of the voltages a solution carries"""
    y = bus_admittance(case)
    v = pf.v_mag * np.exp(1j * pf.v_ang)
    s = v * np.conj(y @ v)
    p_spec, q_spec = scheduled_injections(case, pf.load_scale)
    p_rows = [k for k, bus in enumerate(case.buses) if bus.kind != 'slack']
    q_rows = [k for k, bus in enumerate(case.buses) if bus.kind == 'pq']
    worst = np.max(np.abs(np.concatenate([p_spec[p_rows] - s.real[p_rows], q_spec[q_rows] - s.imag[q_rows]])))
    return pytest.approx(float(worst) if np.isfinite(worst) else float('inf'), rel=1e-9, abs=1e-12)


def _random_network(seed, n=8):
    """Connected random admittance matrix with series lines and small shunts"""
    rng = np.random.default_rng(seed)
    edges = {(k, (k + 1) % n) for k in range(n)}
    for _ in range(n):
        a, b = rng.choice(n, size=2, replace=False)
        edges.add((min(a, b), max(a, b)))
    y = np.zeros((n, n), dtype=complex)
    for a, b in edges:
        ys = complex(rng.uniform(0.5, 2.0), -rng.uniform(2.0, 10.0))
        y[a, a] += ys
        y[b, b] += ys
        y[a, b] -= ys
        y[b, a] -= ys
    y[np.diag_indices(n)] += rng.uniform(0.01, 0.2, n) + 1j * rng.uniform(0.01, 0.1, n)
    return y, rng


class TestCaseParser:
    def test_bundled_cases_parse(self):
        names = list_cases()
        assert {'smib', 'three_bus', 'wscc9', 'ieee39'} <= set(names)
        for name in names:
            case = load_case(name)
            assert case.n_gen >= 2
            assert case.slack_bus.kind == 'slack'

    def test_ieee39_sizes(self):
        case = load_case('ieee39')
        assert case.n_bus == 39
        assert case.n_gen == 10

    def test_line_ids_default_to_position(self, three_bus):
        assert [line.id for line in three_bus.lines] == [1, 2, 3]
        assert [gen.id for gen in three_bus.generators] == [1, 2]

    def test_missing_field_names_path(self):
        doc = _three_bus_doc()
        del doc['lines'][1]['x']
        with pytest.raises(CaseFormatError) as info:
            parse_case(doc)
        assert info.value.path == 'lines[1]'
        assert "'x'" in str(info.value)

    def test_unknown_bus_reference(self):
        doc = _three_bus_doc()
        doc['lines'][0]['to'] = 99
        with pytest.raises(CaseFormatError) as info:
            parse_case(doc)
        assert info.value.path == 'lines[0].to'

    def test_two_slack_buses_rejected(self):
        doc = _three_bus_doc()
        doc['buses'][1]['kind'] = 'slack'
        with pytest.raises(CaseFormatError, match='more than one slack'):
            parse_case(doc)

    def test_no_slack_rejected(self):
        doc = _three_bus_doc()
        doc['buses'][0]['kind'] = 'pv'
        with pytest.raises(CaseFormatError, match='no slack'):
            parse_case(doc)

    def test_duplicate_bus_id(self):
        doc = _three_bus_doc()
        doc['buses'][2]['id'] = 2
        with pytest.raises(CaseFormatError, match='duplicate bus id'):
            parse_case(doc)

    def test_single_generator_rejected(self):
        doc = _three_bus_doc()
        doc['generators'] = doc['generators'][:1]
        doc['buses'][1]['kind'] = 'pq'
        with pytest.raises(CaseFormatError, match='at least 2 generators'):
            parse_case(doc)

    def test_disconnected_network(self):
        doc = _three_bus_doc()
        doc['lines'] = [line for line in doc['lines'] if 3 not in (line['from'], line['to'])]
        with pytest.raises(CaseFormatError, match='disconnected'):
            parse_case(doc)

    def test_out_of_service_line_is_kept_but_not_stamped(self):
        doc = _three_bus_doc()
        doc['lines'][2]['status'] = 'out'
        case = parse_case(doc)
        assert case.line(3).in_service is False
        y = bus_admittance(case)
        assert y[1, 2] == 0

    def test_invalid_json_text(self):
        with pytest.raises(CaseFormatError, match='invalid JSON'):
            parse_case('{"name": ')

    def test_non_numeric_value(self):
        doc = _three_bus_doc()
        doc['generators'][0]['h'] = 'big'
        with pytest.raises(CaseFormatError) as info:
            parse_case(doc)
        assert info.value.path == 'generators[0].h'

    def test_unknown_bundled_name(self):
        with pytest.raises(CaseFormatError, match='unknown bundled case'):
            load_case('nope')

    def test_describe_mentions_counts(self, wscc9):
        text = wscc9.describe()
        assert '9 buses' in text
        assert '3 generators' in text


class TestAdmittance:
    def test_bus_admittance_symmetric_without_taps(self, wscc9):
        y = bus_admittance(wscc9)
        np.testing.assert_allclose(y, y.T)

    def test_row_sums_equal_shunt_charging(self, three_bus):
        y = bus_admittance(three_bus)
        expected = np.zeros(3, dtype=complex)
        for line in three_bus.lines:
            for end in (line.from_bus, line.to_bus):
                expected[three_bus.bus_index[end]] += 0.5j * line.b_shunt
        np.testing.assert_allclose(y.sum(axis=1), expected, atol=1e-12)

    def test_extended_matrix_has_internal_nodes(self, wscc9):
        y = build_admittance(wscc9)
        assert y.shape == (12, 12)
        assert internal_nodes(wscc9) == (9, 10, 11)
        _, _, xdp = wscc9.machine_arrays()
        assert y[9, 9] == pytest.approx(1.0 / (1j * xdp[0]))

    def test_overlays_commute(self, wscc9):
        pf = power_flow(wscc9)
        overlays = [FaultShunt(7, 1e6 + 0j), RemoveLine(4), ScaleLoads(1.1)]
        a = build_admittance(wscc9, overlays, pf)
        b = build_admittance(wscc9, list(reversed(overlays)), pf)
        np.testing.assert_allclose(a, b)

    def test_removed_generator_row_is_empty(self, wscc9):
        y = build_admittance(wscc9, [RemoveGenerator(2)])
        node = wscc9.n_bus + 1
        assert not np.any(y[node])

    def test_removing_every_generator_fails(self, three_bus):
        with pytest.raises(NetworkError):
            build_admittance(three_bus, [RemoveGenerator(1), RemoveGenerator(2)])

    def test_unknown_overlay_target(self, three_bus):
        with pytest.raises(NetworkError):
            build_admittance(three_bus, [RemoveLine(42)])

    def test_bolted_fault_is_clamped(self, wscc9):
        y = fault_admittance(wscc9, 7, 0.0, 0.0)
        assert y == pytest.approx(1.0 / complex(0.0, MIN_FAULT_IMPEDANCE))

    def test_slg_uses_larger_impedance(self, wscc9):
        three = fault_admittance(wscc9, 7, 0.0, 5.0)
        slg = fault_admittance(wscc9, 7, 0.0, 5.0, kind='slg')
        assert abs(three) == pytest.approx(abs(slg) * SLG_IMPEDANCE_FACTOR)


class TestKronReduce:
    def test_matches_schur_complement(self, wscc9):
        y = build_admittance(wscc9, solution=power_flow(wscc9))
        keep = internal_nodes(wscc9)
        reduced = kron_reduce(y, keep)
        elim = list(reduced.eliminated)
        k = list(keep)
        expected = y[np.ix_(k, k)] - y[np.ix_(k, elim)] @ np.linalg.inv(y[np.ix_(elim, elim)]) @ y[np.ix_(elim, k)]
        np.testing.assert_allclose(reduced.y_red, expected, atol=1e-9)

    def test_recovery_zeroes_eliminated_injections(self, wscc9):
        y = build_admittance(wscc9, solution=power_flow(wscc9))
        keep = internal_nodes(wscc9)
        reduced = kron_reduce(y, keep)
        v_keep = np.array([1.05, 1.0 + 0.1j, 0.98 - 0.05j])
        v_elim = reduced.recovery @ v_keep
        v = np.zeros(y.shape[0], dtype=complex)
        v[list(keep)] = v_keep
        v[list(reduced.eliminated)] = v_elim
        current = y @ v
        np.testing.assert_allclose(current[list(reduced.eliminated)], 0, atol=1e-9)
        np.testing.assert_allclose(current[list(keep)], reduced.y_red @ v_keep, atol=1e-9)

    @pytest.mark.parametrize('seed', range(50))
    def test_random_networks_match_full_solve(self, seed):
        y, rng = _random_network(seed)
        keep = sorted(int(k) for k in rng.choice(8, size=3, replace=False))
        reduced = kron_reduce(y, keep)
        injected = rng.normal(size=3) + 1j * rng.normal(size=3)
        current = np.zeros(8, dtype=complex)
        current[keep] = injected
        v = np.linalg.solve(y, current)
        np.testing.assert_allclose(reduced.y_red @ v[keep], injected, rtol=0, atol=1e-10)
        np.testing.assert_allclose(reduced.recovery @ v[keep], v[list(reduced.eliminated)], rtol=0, atol=1e-10)

    def test_keep_everything(self):
        y = np.array([[2.0, -1.0], [-1.0, 2.0]], dtype=complex)
        reduced = kron_reduce(y, [0, 1])
        np.testing.assert_allclose(reduced.y_red, y)
        assert reduced.eliminated == ()

    def test_singular_block(self):
        y = np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]], dtype=complex)
        with pytest.raises(NetworkError, match='singular'):
            kron_reduce(y, [0])

    def test_bad_keep_indices(self):
        with pytest.raises(NetworkError):
            kron_reduce(np.eye(2, dtype=complex), [0, 0])


class TestPowerFlow:
    def test_wscc9_reference_point(self, wscc9):
        pf = power_flow(wscc9)
        assert pf.converged
        assert pf.max_mismatch <= 1e-8
        angles = np.degrees(pf.v_ang)
        assert angles[wscc9.bus_index[2]] == pytest.approx(9.28, abs=0.1)
        assert angles[wscc9.bus_index[3]] == pytest.approx(4.66, abs=0.1)
        assert pf.v_mag[wscc9.bus_index[5]] == pytest.approx(0.9956, abs=2e-3)
        assert pf.p_inj[wscc9.bus_index[1]] == pytest.approx(0.716, abs=5e-3)

    def test_scheduled_injections_are_met(self, three_bus):
        pf = power_flow(three_bus)
        assert pf.converged
        assert pf.p_inj[1] == pytest.approx(0.8, abs=1e-7)
        assert pf.p_inj[2] == pytest.approx(-1.2, abs=1e-7)
        assert pf.q_inj[2] == pytest.approx(-0.5, abs=1e-7)
        assert pf.v_mag[0] == pytest.approx(1.02)
        assert pf.v_mag[1] == pytest.approx(1.01)

    def test_load_scale(self, three_bus):
        pf = power_flow(three_bus, load_scale=1.1)
        assert pf.converged
        assert pf.load_scale == 1.1
        assert pf.p_inj[2] == pytest.approx(-1.32, abs=1e-7)

    def test_non_convergence_is_reported_not_raised(self, three_bus):
        pf = power_flow(three_bus, max_iter=1)
        assert not pf.converged
        assert pf.iterations == 1

    def test_extreme_loading_does_not_converge(self, three_bus):
        doc = copy.deepcopy(_three_bus_doc())
        doc['buses'][2]['p_load'] = 40.0
        case = parse_case(doc)
        pf = power_flow(case)
        assert not pf.converged
        assert pf.max_mismatch == _returned_mismatch(case, pf)

    @pytest.mark.parametrize('max_iter', [1, 2, 3])
    def test_mismatch_describes_returned_state(self, three_bus, max_iter):
        pf = power_flow(three_bus, max_iter=max_iter)
        assert pf.max_mismatch == _returned_mismatch(three_bus, pf)

    def test_mismatch_after_range_abort(self, three_bus, monkeypatch, capsys):
        monkeypatch.setattr(importlib.import_module('tsagent.grid.power_flow'), '_VM_LIMIT', 0.5)
        pf = power_flow(three_bus)
        assert not pf.converged
        assert pf.iterations == 1
        assert 'left the physical range' in capsys.readouterr().out
        assert pf.max_mismatch == _returned_mismatch(three_bus, pf)
        assert pf.max_mismatch != _returned_mismatch(three_bus, power_flow(three_bus, max_iter=1))

    def test_invalid_load_scale(self, three_bus):
        with pytest.raises(ValueError):
            power_flow(three_bus, load_scale=0.0)
