"""Configuration management for tsagent"""

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import ConfigError
from .models.architecture import Requirements, SEARCH_SPACE_PRESETS
from .models.dataset import FEATURE_SCHEMES
from .models.scenario import StabilityThresholds

DEFAULT_RUN_CONFIG: Dict[str, Any] = {
    'case': 'wscc9',
    'backend': {'kind': 'mock', 'script': None},
    'thresholds': StabilityThresholds().to_dict(),
    'features': {'scheme': 'statistical', 'select_k': None},
    'campaign': {
        'size': 200,
        'seed': 0,
        'balance_target': 0.5,
        'balance_tolerance': 0.05,
        'task': 'binary',
        'max_retries': 3,
        'use_rag': True,
        'use_cot': True,
        'use_feedback': True,
        'rag_k': 3,
        'workers': 1,
    },
    'requirements': Requirements().to_dict(),
    'search_space': 'desk',
    'search': {'n_candidates': 4, 'epoch_budget': 30},
    'output_dir': 'runs',
    'llm': {
        'temperature': 0.5,
        'max_tokens': 2048,
        'top_p': 0.95,
        'requests_per_minute': 10,
        'timeout': 60,
        'max_retries': 3,
    },
}


def _merge(defaults: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; nested dicts are merged, everything else replaced"""
    out = copy.deepcopy(defaults)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


class ConfigManager:
    """Manages user configuration with persistent storage"""

    def __init__(self, config_dir: Optional[Path] = None, config_file: Optional[Path] = None):
        """
        Initialize configuration manager

        Args:
            config_dir: Custom config directory (defaults to <project>/.tsagent)
            config_file: Explicit run configuration file; must exist
        """
        home_dir = Path.home() / '.tsagent'

        if config_file is not None:
            config_file = Path(config_file)
            if not config_file.is_file():
                raise ConfigError(f"config file not found: {config_file}")
            selected_dir = config_file.parent
            is_new_dir = False
        else:
            if config_dir is None:
                project_root = Path(__file__).resolve().parent.parent
                selected_dir = project_root / '.tsagent'
            else:
                selected_dir = Path(config_dir)

            # Fall back to the home directory if the project directory is read-only
            try:
                is_new_dir = not selected_dir.exists()
                selected_dir.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                if config_dir is None:
                    print(f"[Config] Warning: Could not create {selected_dir} ({exc}). Falling back to {home_dir}.")
                    selected_dir = home_dir
                    is_new_dir = not selected_dir.exists()
                    selected_dir.mkdir(parents=True, exist_ok=True)
                else:
                    raise

        self.config_dir = selected_dir
        if is_new_dir:
            print(f"[Config] Created local data directory: {self.config_dir}")

        self.config_file = config_file or self.config_dir / 'config.json'
        self.defaults = copy.deepcopy(DEFAULT_RUN_CONFIG)
        self.config = self.load()

    def load(self) -> Dict[str, Any]:
        """Load configuration from file or create with defaults"""
        if self.config_file.exists():
            try:
                with open(self.config_file, 'r', encoding='utf-8') as f:
                    config = json.load(f)
            except (json.JSONDecodeError, IOError) as e:
                raise ConfigError(f"could not load config from {self.config_file}: {e}")
            if not isinstance(config, dict):
                raise ConfigError(f"invalid config in {self.config_file}: "
                                  f"expected a JSON object, got {type(config).__name__}")
            return _merge(self.defaults, config)
        self.save(self.defaults)
        return copy.deepcopy(self.defaults)

    def save(self, config: Optional[Dict[str, Any]] = None) -> bool:
        """
        Save configuration to file

        Returns:
            True if successful, False otherwise
        """
        if config is None:
            config = self.config
        try:
            # Atomic replace so an interrupted write never truncates the file
            temp_file = self.config_file.with_suffix(self.config_file.suffix + '.tmp')
            try:
                with temp_file.open('w', encoding='utf-8') as f:
                    json.dump(config, f, indent=2)
                temp_file.replace(self.config_file)
            finally:
                if temp_file.exists():
                    temp_file.unlink(missing_ok=True)
            return True
        except (IOError, TypeError) as e:
            print(f"[ERROR] Could not save config to {self.config_file}: {e}")
            return False

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def set(self, key: str, value: Any) -> bool:
        self.config[key] = value
        return self.save()

    def update(self, updates: Dict[str, Any]) -> bool:
        """Merge nested updates and save"""
        self.config = _merge(self.config, updates)
        return self.save()

    def reset(self) -> bool:
        self.config = copy.deepcopy(self.defaults)
        return self.save()

    def get_config_path(self) -> Path:
        return self.config_dir

    def get_all(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)


# --------------------------------------------------------------------------- #
# Validated run configuration
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class CampaignSettings:
    size: int = 200
    seed: int = 0
    balance_target: float = 0.5
    balance_tolerance: float = 0.05
    task: str = 'binary'
    max_retries: int = 3
    use_rag: bool = True
    use_cot: bool = True
    use_feedback: bool = True
    rag_k: int = 3
    workers: int = 1

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("campaign size must be >= 1")
        if not 0.0 < self.balance_target < 1.0:
            raise ValueError("balance_target must lie in (0, 1)")
        if self.task not in ('binary', 'multiclass'):
            raise ValueError("task must be 'binary' or 'multiclass'")
        if self.max_retries < 0 or self.rag_k < 1 or self.workers < 1:
            raise ValueError("max_retries must be >= 0, rag_k and workers >= 1")


@dataclass(frozen=True)
class LLMSettings:
    temperature: float = 0.5
    max_tokens: int = 2048
    top_p: float = 0.95
    requests_per_minute: int = 10
    timeout: float = 60.0
    max_retries: int = 3


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a run needs, validated.

    ``backend`` is ``{"kind": "remote", "base_url", "model", "embed_model"}``
    or ``{"kind": "mock", "script": path or null}``. The API key never
    appears here; it is read from the environment when the backend is built.
    """
    case: str = 'wscc9'
    backend: Dict[str, Any] = field(default_factory=lambda: {'kind': 'mock', 'script': None})
    thresholds: StabilityThresholds = field(default_factory=StabilityThresholds)
    feature_scheme: str = 'statistical'
    select_k: Optional[int] = None
    campaign: CampaignSettings = field(default_factory=CampaignSettings)
    requirements: Requirements = field(default_factory=Requirements)
    search_space: str = 'desk'
    n_candidates: int = 4
    epoch_budget: int = 30
    output_dir: str = 'runs'
    llm: LLMSettings = field(default_factory=LLMSettings)

    @property
    def seed(self) -> int:
        return self.campaign.seed

    @property
    def n_classes(self) -> int:
        return 2 if self.campaign.task == 'binary' else 4

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], check_paths: bool = True) -> 'RunConfig':
        """
        Validate a merged configuration mapping

        Raises:
            ConfigError: any invalid value, an ambiguous backend, or a
                referenced file that does not exist
        """
        data = _merge(DEFAULT_RUN_CONFIG, raw or {})
        try:
            backend = dict(data['backend'])
            kind = backend.get('kind')
            if kind == 'remote':
                missing = [k for k in ('base_url', 'model') if not backend.get(k)]
                if missing:
                    raise ConfigError(f"remote backend needs {', '.join(missing)}")
                if backend.get('script'):
                    raise ConfigError("backend must be either remote or mock, not both")
                backend.setdefault('embed_model', 'text-embedding-ada-002')
            elif kind == 'mock':
                if backend.get('base_url'):
                    raise ConfigError("backend must be either remote or mock, not both")
                script = backend.get('script')
                if script and check_paths and not Path(script).is_file():
                    raise ConfigError(f"mock script not found: {script}")
            else:
                raise ConfigError(f"backend kind must be 'remote' or 'mock', got {kind!r}")

            case = str(data['case'])
            if check_paths:
                from .grid.case_parser import list_cases
                if case not in list_cases() and not Path(case).is_file():
                    raise ConfigError(f"case '{case}' is neither bundled nor an existing file")

            features = data['features']
            if features.get('scheme') not in FEATURE_SCHEMES:
                raise ConfigError(f"feature scheme must be one of {FEATURE_SCHEMES}")
            if data['search_space'] not in SEARCH_SPACE_PRESETS:
                raise ConfigError(f"unknown search space preset '{data['search_space']}'")
            search = data.get('search') or {}

            return cls(
                case=case,
                backend=backend,
                thresholds=StabilityThresholds.from_dict(data['thresholds']),
                feature_scheme=features['scheme'],
                select_k=features.get('select_k'),
                campaign=CampaignSettings(**data['campaign']),
                requirements=Requirements.from_dict(data['requirements']),
                search_space=data['search_space'],
                n_candidates=int(search.get('n_candidates', 4)),
                epoch_budget=int(search.get('epoch_budget', 30)),
                output_dir=str(data['output_dir']),
                llm=LLMSettings(**data['llm']),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid run configuration: {exc}")

    def to_dict(self) -> Dict[str, Any]:
        """Snapshot for the run directory (no secrets)"""
        backend = {k: v for k, v in self.backend.items() if 'key' not in k.lower()}
        return {
            'case': self.case,
            'backend': backend,
            'thresholds': self.thresholds.to_dict(),
            'features': {'scheme': self.feature_scheme, 'select_k': self.select_k},
            'campaign': asdict(self.campaign),
            'requirements': self.requirements.to_dict(),
            'search_space': self.search_space,
            'search': {'n_candidates': self.n_candidates, 'epoch_budget': self.epoch_budget},
            'output_dir': self.output_dir,
            'llm': asdict(self.llm),
        }

    def with_overrides(self, seed: Optional[int] = None, offline: bool = False,
                       output_dir: Optional[str] = None) -> 'RunConfig':
        """Apply CLI overrides; ``offline`` forces the mock backend"""
        data = self.to_dict()
        if seed is not None:
            data['campaign']['seed'] = int(seed)
        if offline and data['backend'].get('kind') != 'mock':
            data['backend'] = {'kind': 'mock', 'script': None}
        if output_dir is not None:
            data['output_dir'] = output_dir
        return RunConfig.from_dict(data, check_paths=False)


def load_run_config(path: Optional[Path] = None) -> RunConfig:
    """Run configuration from ``path`` or from the global manager"""
    manager = ConfigManager(config_file=path) if path else get_config_manager()
    return RunConfig.from_dict(manager.get_all())


# Global instance for easy access
_config_manager = None


def get_config_manager() -> ConfigManager:
    """Get or create global configuration manager"""
    global _config_manager
    if _config_manager is None:
        _config_manager = ConfigManager()
    return _config_manager


def get_config(key: str, default: Any = None) -> Any:
    return get_config_manager().get(key, default)


def set_config(key: str, value: Any) -> bool:
    return get_config_manager().set(key, value)


def get_runs_dir() -> Path:
    """Default root for run directories"""
    runs_dir = get_config_manager().get_config_path() / 'runs'
    runs_dir.mkdir(parents=True, exist_ok=True)
    return runs_dir
