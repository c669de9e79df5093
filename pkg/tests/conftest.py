"""Shared fixtures: isolate config into a temp directory for every test."""

import sys
from pathlib import Path

import pytest

# Make the repo root importable when running pytest from anywhere
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import tsagent.config as config_module
from tsagent.config import ConfigManager
from tsagent.grid import bundled_case


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Point the global config singleton at a fresh temp directory."""
    monkeypatch.delenv('TSA_LLM_API_KEY', raising=False)
    manager = ConfigManager(config_dir=tmp_path / 'config')
    monkeypatch.setattr(config_module, '_config_manager', manager)
    yield manager


@pytest.fixture(scope='session')
def smib():
    return bundled_case('smib')


@pytest.fixture(scope='session')
def three_bus():
    return bundled_case('three_bus')


@pytest.fixture(scope='session')
def wscc9():
    return bundled_case('wscc9')
