"""Tests for the non-interactive CLI."""

import json

import numpy as np
import pytest

from tsagent.cli import EXIT_CONFIG, EXIT_OK, EXIT_STAGE_FAILED, EXIT_VALIDATION, main
from tsagent.dataset import read_trajectories, split, write_dataset
from tsagent.export import read_json, write_json
from tsagent.models.architecture import ArchitectureDescriptor
from tsagent.models.dataset import Dataset
from tsagent.nn import instantiate, save_weights


def _scenario_file(tmp_path, **fields):
    payload = {'fault_kind': 'three_phase', 'location': 2, 'clearing_ms': 100, 'id': 'fault07'}
    payload.update(fields)
    path = tmp_path / 'fault07.json'
    path.write_text(json.dumps(payload), encoding='utf-8')
    return path


def _dataset(tmp_path, n=60, dim=6):
    rng = np.random.default_rng(0)
    y = np.arange(n) % 2
    x = rng.normal(size=(n, dim)) + 2.0 * y[:, None]
    ds = Dataset(x, y, 2, tuple(f"f{i}" for i in range(dim)))
    return ds, write_dataset(ds, tmp_path / 'dataset.tsds')


def test_no_command_prints_help(capsys):
    assert main([]) == EXIT_OK
    assert 'usage: tsagent' in capsys.readouterr().out


class TestSimulate:
    def test_writes_labeled_trajectory(self, tmp_path, capsys):
        path = _scenario_file(tmp_path)
        code = main(['simulate', str(path), '--case', 'smib', '--out', str(tmp_path / 'out')])
        assert code == EXIT_OK
        trajectories = read_trajectories(tmp_path / 'out' / 'fault07.tstr')
        assert len(trajectories) == 1
        assert 'Trajectory written to' in capsys.readouterr().out

    def test_unknown_bus_is_a_validation_error(self, tmp_path, capsys):
        path = _scenario_file(tmp_path, location=42)
        assert main(['simulate', str(path), '--case', 'smib', '--out', str(tmp_path)]) == EXIT_VALIDATION
        assert 'not valid for case' in capsys.readouterr().err

    def test_unreadable_scenario_file(self, tmp_path, capsys):
        path = tmp_path / 'broken.json'
        path.write_text('{not json', encoding='utf-8')
        assert main(['simulate', str(path), '--case', 'smib']) == EXIT_VALIDATION
        assert 'invalid scenario file' in capsys.readouterr().err


class TestRunCommands:
    def test_campaign_needs_request(self, tmp_path, capsys):
        assert main(['campaign', '--out', str(tmp_path)]) == EXIT_VALIDATION
        assert 'request text' in capsys.readouterr().err

    def test_remote_backend_without_key(self, tmp_path, capsys):
        config = write_json(tmp_path / 'run.json', {
            'backend': {'kind': 'remote', 'base_url': 'http://localhost:9', 'model': 'm'}})
        out = tmp_path / 'runs'
        code = main(['campaign', 'fault at bus 7', '--config', str(config), '--out', str(out)])
        assert code == EXIT_CONFIG
        assert 'TSA_LLM_API_KEY' in capsys.readouterr().err
        assert not out.exists() or not any(out.iterdir())

    def test_missing_config_file(self, tmp_path):
        assert main(['campaign', 'x', '--config', str(tmp_path / 'nope.json')]) == EXIT_CONFIG

    def test_search_on_missing_dataset_writes_manifest(self, tmp_path):
        out = tmp_path / 'runs'
        code = main(['search', '--dataset', str(tmp_path / 'missing.tsds'), '--out', str(out), '--seed', '4'])
        assert code == EXIT_STAGE_FAILED
        (run_dir,) = list(out.iterdir())
        assert run_dir.name.endswith('-4')
        manifest = read_json(run_dir / 'manifest.json')
        assert manifest['stages'] == {'search': 'skipped'}
        assert 'config.json' in manifest['artifacts']
        assert 'api_key' not in (run_dir / 'config.json').read_text(encoding='utf-8')

    @pytest.mark.slow
    def test_offline_campaign_run_directory(self, tmp_path):
        config = write_json(tmp_path / 'run.json', {'case': 'smib', 'campaign': {'size': 20, 'use_rag': False}})
        out = tmp_path / 'runs'
        request = "Sweep clearing times 100-300 ms in steps of 20 ms for a three-phase fault at bus 2."
        assert main(['campaign', request, '--config', str(config), '--offline', '--out', str(out)]) == EXIT_OK
        (run_dir,) = list(out.iterdir())
        for name in ('config.json', 'transcript.log', 'transcript.json', 'dataset.tsds',
                     'trajectories.tstr', 'summary.json', 'manifest.json'):
            assert (run_dir / name).is_file(), name
        manifest = read_json(run_dir / 'manifest.json')
        assert manifest['stages'] == {'campaign': 'ok'}
        assert manifest['request'] == request
        assert read_json(run_dir / 'summary.json')['integrated'] == 11

    @pytest.mark.slow
    def test_offline_pipeline_on_nine_bus_case(self, tmp_path, capsys):
        config = write_json(tmp_path / 'run.json', {'case': 'wscc9', 'campaign': {'size': 500}})
        out = tmp_path / 'runs'
        request = ("Generate a balanced dataset of 500 scenarios of three-phase faults "
                   "with clearing times 50-500 ms.")
        assert main(['pipeline', request, '--config', str(config), '--offline', '--out', str(out)]) == EXIT_OK
        (run_dir,) = list(out.iterdir())
        assert read_json(run_dir / 'manifest.json')['stages'] == {'campaign': 'ok', 'search': 'ok'}

        summary = read_json(run_dir / 'summary.json')
        assert summary['integrated'] >= 500
        counts = summary['dataset_class_counts']
        assert abs(counts[0] / sum(counts) - 0.5) <= 0.05
        assert all(traj.n_points == 101 for traj in read_trajectories(run_dir / 'trajectories.tstr'))

        result = read_json(run_dir / 'search' / 'result.json')
        assert result['best_accuracy'] >= 0.9
        assert result['test_metrics']['accuracy'] >= 0.9
        best = next(r for r in result['history'] if r['digest'] == result['best_digest'])
        assert best['latency_ms'] < 10.0

        capsys.readouterr()
        code = main(['eval', '--model', str(run_dir / 'search' / 'best.tsw'),
                     '--dataset', str(run_dir / 'dataset.tsds'), '--json'])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc['accuracy'] >= 0.9
        assert doc['latency_ms'] < 10.0


class TestEval:
    def _weights(self, tmp_path, input_dim):
        desc = ArchitectureDescriptor(hidden=(8,), seed=2)
        search_dir = tmp_path / 'search'
        path = save_weights(instantiate(desc, input_dim, 2), search_dir / 'best.tsw')
        write_json(search_dir / 'features.json', {'split_seed': 5, 'columns': None, 'names': []})
        return desc, path

    def test_json_metrics_on_test_split(self, tmp_path, capsys):
        ds, dataset_path = _dataset(tmp_path)
        desc, weights = self._weights(tmp_path, ds.dim)
        assert main(['eval', '--model', str(weights), '--dataset', str(dataset_path), '--json']) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc['samples'] == len(split(ds, seed=5)[2])
        assert doc['split_seed'] == 5
        assert doc['digest'] == desc.digest
        assert doc['param_count'] == desc.param_count(ds.dim, 2)
        assert 0.0 <= doc['accuracy'] <= 1.0

    def test_feature_width_mismatch(self, tmp_path, capsys):
        _, dataset_path = _dataset(tmp_path)
        _, weights = self._weights(tmp_path, 5)
        assert main(['eval', '--model', str(weights), '--dataset', str(dataset_path)]) == EXIT_VALIDATION
        assert 'model expects 5 features' in capsys.readouterr().err

    def test_missing_weights(self, tmp_path):
        _, dataset_path = _dataset(tmp_path)
        code = main(['eval', '--model', str(tmp_path / 'none.tsw'), '--dataset', str(dataset_path)])
        assert code == EXIT_STAGE_FAILED
