"""
tsagent - LLM agents for transient stability assessment

Organized package structure:
  - grid/, sim/: case files, power flow, Kron reduction and swing-equation simulation
  - core/: stability labeling, the scenario agent and the architecture search
  - dataset/: features, selection, balancing and the .tsds container
  - clients/: remote OpenAI-compatible client, scripted mock, offline policy
  - nn/: dense networks trained in numpy
  - models/: data models shared by all of the above

Backends:
  - 'remote': any OpenAI-compatible endpoint (key in $TSA_LLM_API_KEY)
  - 'mock': scripted responses keyed by message digest, with an offline fallback
"""

__version__ = '0.3.0'

# Simulation
from .grid import bundled_case, list_cases, load_case, power_flow
from .sim import critical_clearing_sweep, simulate
from .core import classify

# Agents
from .core.scenario_agent import AgentTranscript, ScenarioAgent, SubRequest, run_campaign
from .core.nas import search
from .core.feedback import feedback_report

# Data models
from .models import ArchitectureDescriptor, Requirements, Scenario, SearchSpace, StabilityThresholds

# Config
from .config import ConfigManager, RunConfig, get_config_manager, load_run_config

__all__ = [
    '__version__',
    # Simulation
    'bundled_case',
    'list_cases',
    'load_case',
    'power_flow',
    'critical_clearing_sweep',
    'simulate',
    'classify',
    # Agents
    'AgentTranscript',
    'ScenarioAgent',
    'SubRequest',
    'run_campaign',
    'search',
    'feedback_report',
    # Models
    'ArchitectureDescriptor',
    'Requirements',
    'Scenario',
    'SearchSpace',
    'StabilityThresholds',
    # Config
    'ConfigManager',
    'RunConfig',
    'get_config_manager',
    'load_run_config',
]
