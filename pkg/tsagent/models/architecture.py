"""Architecture search data models"""

import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

FAMILIES = ('mlp', 'multi_branch')
LOSSES = ('ce', 'weighted_ce', 'focal')
TASKS = ('binary', 'multiclass')
STOP_REASONS = ('target_met', 'iterations_exhausted')
RECORD_STATUSES = ('evaluated', 'rejected', 'aborted')
BRANCH_NAMES = ('temporal', 'spatial', 'frequency')

ARCH_SCHEMA_VERSION = 1

# Fields searched for each family; everything else stays at its default
COMMON_FIELDS = ('dropout', 'batch_norm', 'loss', 'lr', 'weight_decay', 'batch_size', 'epochs')
FAMILY_FIELDS = {
    'mlp': ('hidden',),
    'multi_branch': ('branches', 'fusion_dim', 'attention', 'heads', 'head'),
}


def _widths(value: Any, name: str) -> Tuple[int, ...]:
    if value is None:
        return ()
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    out = []
    for w in value:
        if isinstance(w, bool) or not isinstance(w, (int, float)) or int(w) != w:
            raise ValueError(f"{name} widths must be integers, got {w!r}")
        if int(w) < 1:
            raise ValueError(f"{name} widths must be >= 1, got {int(w)}")
        out.append(int(w))
    return tuple(out)


def _canonical(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_canonical(v) for v in value]
    return value


@dataclass(frozen=True)
class ArchitectureDescriptor:
    """
    One point of the design space, sufficient to build and train a model.

    ``branches`` holds the temporal, spatial and frequency branch widths of a
    multi-branch network; ``branch_slices`` optionally pins each branch to a
    contiguous ``(start, stop)`` input range (default: equal thirds).
    """
    family: str = 'mlp'
    hidden: Tuple[int, ...] = ()
    branches: Tuple[Tuple[int, ...], ...] = ()
    branch_slices: Optional[Tuple[Tuple[int, int], ...]] = None
    fusion_dim: int = 0
    attention: bool = False
    heads: int = 1
    head: Tuple[int, ...] = ()
    dropout: float = 0.2
    batch_norm: bool = True
    loss: str = 'ce'
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    lr: float = 1e-3
    weight_decay: float = 1e-4
    max_lr: Optional[float] = None
    warmup_frac: float = 0.3
    div_factor: float = 25.0
    final_div: float = 1e4
    epochs: int = 30
    batch_size: int = 64
    patience: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        object.__setattr__(self, 'hidden', _widths(self.hidden, 'hidden'))
        object.__setattr__(self, 'head', _widths(self.head, 'head'))
        object.__setattr__(self, 'branches', tuple(_widths(b, 'branch') for b in self.branches))
        if self.branch_slices is not None:
            object.__setattr__(self, 'branch_slices',
                               tuple((int(a), int(b)) for a, b in self.branch_slices))
        if self.family == 'multi_branch':
            if len(self.branches) != len(BRANCH_NAMES):
                raise ValueError(f"multi_branch needs {len(BRANCH_NAMES)} branches {BRANCH_NAMES}")
            if any(not b for b in self.branches):
                raise ValueError("every branch needs at least one layer")
            if self.fusion_dim < 1:
                raise ValueError("multi_branch needs fusion_dim >= 1")
            if self.branch_slices is not None and len(self.branch_slices) != len(BRANCH_NAMES):
                raise ValueError("branch_slices must give one range per branch")
        if self.attention:
            if self.heads < 1 or self.fusion_dim % self.heads:
                raise ValueError(f"heads ({self.heads}) must divide the attention dim ({self.fusion_dim})")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.focal_gamma < 0 or not 0.0 < self.focal_alpha <= 1.0:
            raise ValueError("focal loss needs alpha in (0, 1] and gamma >= 0")
        if self.lr <= 0 or (self.max_lr is not None and self.max_lr <= 0) or self.weight_decay < 0:
            raise ValueError("learning rates must be positive and weight_decay non-negative")
        if not 0.0 <= self.warmup_frac < 1.0 or self.div_factor <= 0 or self.final_div <= 0:
            raise ValueError("invalid one-cycle schedule")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 0:
            raise ValueError("epochs and batch_size must be >= 1, patience >= 0")

    # ------------------------------------------------------------------ #

    def to_dict(self) -> Dict[str, Any]:
        return {k: _canonical(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> 'ArchitectureDescriptor':
        """
        Build from a decoded architecture block

        ``branches`` may also be given as a mapping keyed by branch name.

        Raises:
            ValueError: unknown field or invalid value
        """
        if not isinstance(raw, dict):
            raise ValueError("architecture block must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown descriptor fields: {', '.join(unknown)}")
        data = dict(raw)
        branches = data.get('branches')
        if isinstance(branches, dict):
            missing = [name for name in BRANCH_NAMES if name not in branches]
            if missing:
                raise ValueError(f"branches missing: {', '.join(missing)}")
            data['branches'] = tuple(branches[name] for name in BRANCH_NAMES)
        elif branches is not None:
            data['branches'] = tuple(tuple(b) if isinstance(b, (list, tuple)) else (b,) for b in branches)
        if data.get('branch_slices') is not None:
            data['branch_slices'] = tuple(tuple(s) for s in data['branch_slices'])
        for name in ('fusion_dim', 'heads', 'epochs', 'batch_size', 'patience', 'seed'):
            if name in data:
                value = data[name]
                if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
                    raise ValueError(f"{name} must be an integer")
                data[name] = int(value)
        for name in ('dropout', 'focal_alpha', 'focal_gamma', 'lr', 'weight_decay', 'max_lr',
                     'warmup_frac', 'div_factor', 'final_div'):
            if data.get(name) is not None:
                value = data[name]
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ValueError(f"{name} must be a number")
                data[name] = float(value)
        for name in ('attention', 'batch_norm'):
            if name in data and not isinstance(data[name], bool):
                raise ValueError(f"{name} must be true or false")
        return cls(**data)

    @property
    def digest(self) -> str:
        """Identity of the design, independent of the seed"""
        payload = self.to_dict()
        payload.pop('seed')
        canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]

    @property
    def peak_lr(self) -> float:
        """One-cycle peak; three times the base rate unless set"""
        return self.max_lr if self.max_lr is not None else 3.0 * self.lr

    def with_seed(self, seed: int) -> 'ArchitectureDescriptor':
        return replace(self, seed=int(seed))

    def output_dim(self, n_classes: int) -> int:
        if self.family == 'multi_branch' and n_classes == 2:
            return 1
        return n_classes

    def slices(self, input_dim: int) -> Tuple[Tuple[int, int], ...]:
        """Input ranges of the three branches"""
        if self.branch_slices is not None:
            return self.branch_slices
        n = len(BRANCH_NAMES)
        if input_dim < n:
            raise ValueError(f"input_dim {input_dim} is too small for {n} branches")
        step = input_dim // n
        bounds = [k * step for k in range(n)] + [input_dim]
        return tuple((bounds[k], bounds[k + 1]) for k in range(n))

    def param_count(self, input_dim: int, n_classes: int) -> int:
        """
        Trainable parameters by the layer-sum formula

        Linear layers count weights and biases; batch norm counts scale and
        shift (running statistics are not parameters).
        """
        bn = 2 if self.batch_norm else 0

        def chain(n_in: int, widths: Sequence[int]) -> Tuple[int, int]:
            total = 0
            for w in widths:
                total += n_in * w + w + bn * w
                n_in = w
            return total, n_in

        out_dim = self.output_dim(n_classes)
        if self.family == 'mlp':
            total, last = chain(input_dim, self.hidden)
            return total + last * out_dim + out_dim

        total = 0
        ends = []
        for (start, stop), widths in zip(self.slices(input_dim), self.branches):
            count, last = chain(stop - start, widths)
            total += count
            ends.append(last)
        f = self.fusion_dim
        if self.attention:
            total += sum(e * f + f for e in ends)   # token projections
            total += 4 * (f * f + f)                # q, k, v, output
        else:
            total += sum(ends) * f + f
        count, last = chain(f, self.head)
        return total + count + last * out_dim + out_dim

    def summary(self) -> str:
        if self.family == 'mlp':
            shape = 'mlp ' + ('x'.join(map(str, self.hidden)) or 'linear')
        else:
            shape = ('multi_branch ' + '|'.join('x'.join(map(str, b)) for b in self.branches)
                     + f" fusion {self.fusion_dim}"
                     + (f" attn{self.heads}" if self.attention else '')
                     + (" head " + 'x'.join(map(str, self.head)) if self.head else ''))
        return (f"{shape} dropout={self.dropout:g} bn={'on' if self.batch_norm else 'off'} "
                f"loss={self.loss} lr={self.lr:g}")


# --------------------------------------------------------------------------- #
# Requirements and search space
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Requirements:
    """User targets for a search"""
    p_target: float = 0.9
    lambda_params: int = 5_000_000
    max_latency_ms: float = 10.0
    t_max: int = 5
    task: str = 'binary'

    def __post_init__(self):
        if not 0.0 <= self.p_target <= 1.0:
            raise ValueError("p_target must lie in [0, 1]")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.lambda_params < 1:
            raise ValueError("lambda_params must be positive")
        if self.max_latency_ms <= 0:
            raise ValueError("max_latency_ms must be positive")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Optional[Dict[str, Any]]) -> 'Requirements':
        raw = dict(raw or {})
        unknown = set(raw) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown requirement fields: {', '.join(sorted(unknown))}")
        for name in ('lambda_params', 't_max'):
            if name in raw:
                raw[name] = int(raw[name])
        return cls(**raw)


MENU_FIELDS = ('hidden', 'branches', 'fusion_dim', 'attention', 'heads', 'head') + COMMON_FIELDS


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


@dataclass(frozen=True)
class SearchSpace:
    """Finite menu of choices per descriptor field"""
    families: Tuple[str, ...] = ('mlp',)
    hidden: Tuple[Tuple[int, ...], ...] = ((64, 32),)
    branches: Tuple[Tuple[Tuple[int, ...], ...], ...] = (((32,), (32,), (16,)),)
    fusion_dim: Tuple[int, ...] = (32,)
    attention: Tuple[bool, ...] = (False,)
    heads: Tuple[int, ...] = (4,)
    head: Tuple[Tuple[int, ...], ...] = ((16,),)
    dropout: Tuple[float, ...] = (0.2,)
    batch_norm: Tuple[bool, ...] = (True,)
    loss: Tuple[str, ...] = ('ce',)
    lr: Tuple[float, ...] = (1e-3,)
    weight_decay: Tuple[float, ...] = (1e-4,)
    batch_size: Tuple[int, ...] = (64,)
    epochs: Tuple[int, ...] = (30,)

    def __post_init__(self):
        for f in fields(self):
            menu = _freeze(getattr(self, f.name))
            if isinstance(menu, (str, int, float)):
                menu = (menu,)
            object.__setattr__(self, f.name, tuple(menu))
            if not self.__dict__[f.name]:
                raise ValueError(f"search space menu '{f.name}' is empty")
        bad = [fam for fam in self.families if fam not in FAMILIES]
        if bad:
            raise ValueError(f"unknown families in search space: {bad}")

    def menu(self, name: str) -> tuple:
        return getattr(self, name)

    def violations(self, desc: ArchitectureDescriptor) -> List[str]:
        """Fields of ``desc`` outside their menus"""
        problems = []
        if desc.family not in self.families:
            return [f"family '{desc.family}' not in {list(self.families)}"]
        for name in FAMILY_FIELDS[desc.family] + COMMON_FIELDS:
            value = getattr(desc, name)
            if value not in self.menu(name):
                problems.append(f"{name}={_canonical(value)!r} not in menu {_canonical(self.menu(name))}")
        return problems

    def contains(self, desc: ArchitectureDescriptor) -> bool:
        return not self.violations(desc)

    def descriptors(self, base: Optional[ArchitectureDescriptor] = None) -> Iterator[ArchitectureDescriptor]:
        """Every descriptor in the space, in menu order"""
        base = base or ArchitectureDescriptor()
        for family in self.families:
            names = FAMILY_FIELDS[family] + COMMON_FIELDS
            for combo in itertools.product(*(self.menu(n) for n in names)):
                values = dict(zip(names, combo))
                if family == 'multi_branch' and values['attention'] and values['fusion_dim'] % values['heads']:
                    continue
                defaults = {'hidden': (), 'branches': (), 'fusion_dim': 0, 'attention': False,
                            'heads': 1, 'head': ()}
                yield replace(base, family=family, **{**defaults, **values})

    @property
    def size(self) -> int:
        return sum(1 for _ in self.descriptors())

    def narrowed(self, menus: Dict[str, Any]) -> Tuple['SearchSpace', List[str]]:
        """
        Restrict menus to the given subsets

        Values outside the space are dropped; a menu left empty keeps its
        full range.

        Returns:
            (narrowed space, warnings about clipped values)
        """
        warnings = []
        updates = {}
        for name, proposed in (menus or {}).items():
            if name not in {f.name for f in fields(self)}:
                warnings.append(f"unknown menu '{name}' ignored")
                continue
            proposed = _freeze(proposed)
            if not isinstance(proposed, tuple) or (name in ('hidden', 'head') and proposed
                                                   and isinstance(proposed[0], int)):
                proposed = (proposed,)
            full = self.menu(name)
            kept = tuple(v for v in proposed if v in full)
            clipped = [v for v in proposed if v not in full]
            if clipped:
                warnings.append(f"{name}: {_canonical(tuple(clipped))} outside the search space, clipped")
            if kept:
                updates[name] = kept
            elif proposed:
                warnings.append(f"{name}: nothing left after clipping, keeping full menu")
        return replace(self, **updates), warnings

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: _canonical(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> 'SearchSpace':
        unknown = set(raw) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown search space menus: {', '.join(sorted(unknown))}")
        return cls(**{k: _freeze(v) for k, v in raw.items()})


SEARCH_SPACE_PRESETS: Dict[str, SearchSpace] = {
    'desk': SearchSpace(
        families=('mlp', 'multi_branch'),
        hidden=((32,), (64, 32), (128, 64)),
        branches=(((32,), (32,), (16,)),),
        fusion_dim=(32,),
        attention=(False, True),
        heads=(4,),
        head=((16,),),
        dropout=(0.0, 0.2),
        loss=('ce', 'focal'),
        lr=(1e-3, 3e-3),
        batch_size=(32,),
        epochs=(30,),
    ),
    'large': SearchSpace(
        families=('mlp', 'multi_branch'),
        hidden=((256, 128), (512, 256), (2048, 1024, 512, 256)),
        branches=(((256, 192), (192, 128), (128,)),),
        fusion_dim=(384,),
        attention=(True, False),
        heads=(12,),
        head=((192, 96, 48, 24),),
        dropout=(0.2, 0.3),
        loss=('weighted_ce', 'focal'),
        lr=(1e-3,),
        weight_decay=(1e-4,),
        batch_size=(64,),
        epochs=(100,),
    ),
}


def search_space_preset(name: str) -> SearchSpace:
    try:
        return SEARCH_SPACE_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown search space preset '{name}' (known: {', '.join(SEARCH_SPACE_PRESETS)})")


# --------------------------------------------------------------------------- #
# Training and evaluation results
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Metrics:
    """Classification metrics derived from one confusion matrix"""
    accuracy: float
    precision: Tuple[float, ...]
    recall: Tuple[float, ...]
    f1: Tuple[float, ...]
    support: Tuple[int, ...]
    macro_f1: float
    confusion: Tuple[Tuple[int, ...], ...]
    auc_roc: Optional[float] = None

    def __post_init__(self):
        total = sum(sum(row) for row in self.confusion)
        for row, support in zip(self.confusion, self.support):
            if sum(row) != support:
                raise ValueError("confusion matrix row sums must equal class support")
        if total:
            trace = sum(self.confusion[k][k] for k in range(len(self.confusion)))
            if abs(self.accuracy - trace / total) > 1e-9:
                raise ValueError("accuracy must equal trace/total")
        if self.auc_roc is not None and not 0.0 <= self.auc_roc <= 1.0:
            raise ValueError("auc_roc must lie in [0, 1]")

    @property
    def n_classes(self) -> int:
        return len(self.support)

    def to_dict(self) -> Dict[str, Any]:
        return {k: _canonical(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> 'Metrics':
        return cls(
            accuracy=float(raw['accuracy']),
            precision=tuple(raw['precision']),
            recall=tuple(raw['recall']),
            f1=tuple(raw['f1']),
            support=tuple(int(s) for s in raw['support']),
            macro_f1=float(raw['macro_f1']),
            confusion=tuple(tuple(int(c) for c in row) for row in raw['confusion']),
            auc_roc=raw.get('auc_roc'),
        )


@dataclass
class TrainReport:
    """
    Outcome of one training run.

    ``history`` holds one dict per epoch with train_loss, train_accuracy,
    val_accuracy and lr.
    """
    best_val_accuracy: float
    epochs_run: int
    stopped_early: bool
    param_count: int
    latency_ms: float
    history: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: int = 0
    train_accuracy: float = 0.0
    metrics: Optional[Metrics] = None
    aborted: bool = False
    abort_reason: str = ''

    def __post_init__(self):
        if self.epochs_run < 0 or self.param_count < 0:
            raise ValueError("epochs_run and param_count must be non-negative")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['metrics'] = self.metrics.to_dict() if self.metrics else None
        return data


@dataclass
class HistoryRecord:
    """One evaluated (or rejected) candidate with the strategy active at the time"""
    iteration: int
    descriptor: ArchitectureDescriptor
    accuracy: float
    param_count: int
    latency_ms: float
    strategy: str = ''
    status: str = 'evaluated'
    train_accuracy: float = 0.0
    metrics: Optional[Metrics] = None
    report: Optional[TrainReport] = None
    feedback: str = ''

    def __post_init__(self):
        if self.status not in RECORD_STATUSES:
            raise ValueError(f"status must be one of {RECORD_STATUSES}")
        if self.iteration < 1:
            raise ValueError("iteration numbers start at 1")

    @property
    def digest(self) -> str:
        return self.descriptor.digest

    def feasible(self, requirements: Requirements) -> bool:
        return (self.status == 'evaluated'
                and self.param_count <= requirements.lambda_params
                and self.latency_ms <= requirements.max_latency_ms)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iteration': self.iteration,
            'digest': self.digest,
            'descriptor': self.descriptor.to_dict(),
            'accuracy': self.accuracy,
            'train_accuracy': self.train_accuracy,
            'param_count': self.param_count,
            'latency_ms': self.latency_ms,
            'status': self.status,
            'strategy': self.strategy,
            'feedback': self.feedback,
            'metrics': self.metrics.to_dict() if self.metrics else None,
        }


class History:
    """Append-only log of evaluated architectures"""

    def __init__(self, records: Optional[Sequence[HistoryRecord]] = None):
        self._records: List[HistoryRecord] = []
        for record in records or ():
            self.append(record)

    def append(self, record: HistoryRecord) -> None:
        if self._records and record.iteration < self._records[-1].iteration:
            raise ValueError("history records must arrive in iteration order")
        self._records.append(record)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[HistoryRecord]:
        return iter(self._records)

    def __getitem__(self, index: int) -> HistoryRecord:
        return self._records[index]

    @property
    def records(self) -> Tuple[HistoryRecord, ...]:
        return tuple(self._records)

    @property
    def iterations(self) -> int:
        return self._records[-1].iteration if self._records else 0

    def best_feasible(self, requirements: Requirements) -> Optional[HistoryRecord]:
        """Highest accuracy among feasible records; earliest wins ties"""
        best = None
        for record in self._records:
            if record.feasible(requirements) and (best is None or record.accuracy > best.accuracy):
                best = record
        return best

    def to_frame(self):
        import pandas as pd

        rows = [{
            'iter': r.iteration,
            'digest': r.digest,
            'architecture': r.descriptor.summary(),
            'val_acc': round(r.accuracy, 4),
            'train_acc': round(r.train_accuracy, 4),
            'params': r.param_count,
            'latency_ms': round(r.latency_ms, 3),
            'status': r.status,
        } for r in self._records]
        columns = ['iter', 'digest', 'architecture', 'val_acc', 'train_acc', 'params', 'latency_ms', 'status']
        return pd.DataFrame(rows, columns=columns)

    def to_text(self) -> str:
        if not self._records:
            return "(none yet)"
        return self.to_frame().to_string(index=False)


class Archive:
    """Digests of every descriptor that has been evaluated or rejected"""

    def __init__(self, digests: Sequence[str] = ()):
        self._digests: Dict[str, None] = {}
        for digest in digests:
            self.add(digest)

    def add(self, digest: str) -> bool:
        """Record a digest; False if it was already present"""
        if digest in self._digests:
            return False
        self._digests[digest] = None
        return True

    def __contains__(self, digest: object) -> bool:
        return digest in self._digests

    def __len__(self) -> int:
        return len(self._digests)

    def __iter__(self) -> Iterator[str]:
        return iter(self._digests)


@dataclass
class SearchResult:
    """Best architecture found and the full search record"""
    best: ArchitectureDescriptor
    best_accuracy: float
    history: History
    archive: Archive
    stop_reason: str
    iterations: int
    best_record: Optional[HistoryRecord] = None
    weights: Optional[Dict[str, Any]] = None
    test_metrics: Optional[Metrics] = None
    best_so_far: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.stop_reason not in STOP_REASONS:
            raise ValueError(f"stop_reason must be one of {STOP_REASONS}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'best': self.best.to_dict(),
            'best_digest': self.best.digest,
            'best_accuracy': self.best_accuracy,
            'stop_reason': self.stop_reason,
            'iterations': self.iterations,
            'best_so_far': list(self.best_so_far),
            'archive_size': len(self.archive),
            'test_metrics': self.test_metrics.to_dict() if self.test_metrics else None,
            'history': [r.to_dict() for r in self.history],
        }
