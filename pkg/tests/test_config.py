"""Tests for ConfigManager persistence and RunConfig validation."""

import json

import pytest

from tsagent import config as config_module
from tsagent.config import ConfigManager, RunConfig, get_config, load_run_config, set_config
from tsagent.errors import ConfigError


def test_manager_creates_defaults(tmp_path):
    manager = ConfigManager(config_dir=tmp_path / 'cfg')
    assert (tmp_path / 'cfg' / 'config.json').exists()
    assert manager.get('case') == 'wscc9'
    assert manager.get('search')['n_candidates'] == 4


def test_manager_merges_partial_file(tmp_path):
    (tmp_path / 'config.json').write_text(json.dumps({'campaign': {'size': 12}}), encoding='utf-8')
    manager = ConfigManager(config_dir=tmp_path)
    campaign = manager.get('campaign')
    assert campaign['size'] == 12
    assert campaign['balance_target'] == 0.5


def test_manager_rejects_non_object(tmp_path):
    (tmp_path / 'config.json').write_text('[1, 2]', encoding='utf-8')
    with pytest.raises(ConfigError, match='expected a JSON object'):
        ConfigManager(config_dir=tmp_path)


def test_explicit_file_must_exist(tmp_path):
    with pytest.raises(ConfigError, match='not found'):
        ConfigManager(config_file=tmp_path / 'missing.json')


def test_update_and_reset(tmp_path):
    manager = ConfigManager(config_dir=tmp_path)
    manager.update({'llm': {'timeout': 5}})
    reloaded = ConfigManager(config_dir=tmp_path)
    assert reloaded.get('llm')['timeout'] == 5
    assert reloaded.get('llm')['max_retries'] == 3
    reloaded.reset()
    assert ConfigManager(config_dir=tmp_path).get('llm')['timeout'] == 60


def test_global_accessors_use_isolated_manager():
    assert set_config('search_space', 'large')
    assert get_config('search_space') == 'large'
    assert config_module._config_manager.get('search_space') == 'large'


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig.from_dict({})
        assert cfg.backend['kind'] == 'mock'
        assert cfg.n_candidates == 4
        assert cfg.epoch_budget == 30
        assert cfg.n_classes == 2

    def test_remote_needs_url_and_model(self):
        with pytest.raises(ConfigError, match='base_url, model'):
            RunConfig.from_dict({'backend': {'kind': 'remote'}})

    def test_remote_and_script_is_ambiguous(self, tmp_path):
        with pytest.raises(ConfigError, match='not both'):
            RunConfig.from_dict({'backend': {'kind': 'remote', 'base_url': 'https://x', 'model': 'm',
                                             'script': 'answers.txt'}})

    def test_unknown_backend_kind(self):
        with pytest.raises(ConfigError, match='backend kind'):
            RunConfig.from_dict({'backend': {'kind': 'local'}})

    def test_missing_script_file(self, tmp_path):
        with pytest.raises(ConfigError, match='mock script not found'):
            RunConfig.from_dict({'backend': {'kind': 'mock', 'script': str(tmp_path / 'none.txt')}})

    def test_unknown_case_and_preset(self):
        with pytest.raises(ConfigError, match='neither bundled'):
            RunConfig.from_dict({'case': 'ieee999'})
        with pytest.raises(ConfigError, match='search space'):
            RunConfig.from_dict({'search_space': 'huge'})

    def test_invalid_value_becomes_config_error(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'campaign': {'balance_target': 1.5}})

    def test_overrides(self):
        cfg = RunConfig.from_dict({'backend': {'kind': 'remote', 'base_url': 'https://x', 'model': 'm',
                                               'script': None}})
        offline = cfg.with_overrides(seed=7, offline=True, output_dir='elsewhere')
        assert offline.backend['kind'] == 'mock'
        assert offline.seed == 7
        assert offline.output_dir == 'elsewhere'

    def test_snapshot_has_no_key(self):
        cfg = RunConfig.from_dict({'backend': {'kind': 'remote', 'base_url': 'https://x', 'model': 'm',
                                               'script': None, 'api_key': 'sk-secret'}})
        assert 'sk-secret' not in json.dumps(cfg.to_dict())

    def test_load_from_file(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text(json.dumps({'case': 'smib', 'campaign': {'size': 8}}), encoding='utf-8')
        cfg = load_run_config(path)
        assert cfg.case == 'smib'
        assert cfg.campaign.size == 8
