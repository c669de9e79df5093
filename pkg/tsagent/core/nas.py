"""
LLM-guided neural architecture search

Three roles share one backend:

- the Strategist sees the requirements, the search space, the full history
  and the latest feedback, and proposes a direction plus narrowed menus;
- the Generator sees only the current strategy and emits candidate
  descriptors;
- the Operator checks each candidate against the space and the archive,
  trains the legal ones and turns results into feedback.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from tqdm import tqdm

from ..clients.base import ChatExchange, ChatParams
from ..errors import BlockParseError, SearchError
from ..export import save_search_iteration, save_search_run
from ..models.architecture import (
    Archive,
    ArchitectureDescriptor,
    History,
    HistoryRecord,
    Requirements,
    SearchResult,
    SearchSpace,
)
from ..models.dataset import Dataset
from ..nn.metrics import evaluate
from ..nn.model import Model, instantiate
from ..nn.trainer import train
from ..prompts import NAS_PERSONA, extract_blocks, parse_block, reformat_message, render, render_text
from .feedback import feedback_report

ARCH_SCHEMA = {
    'family': "'mlp' or 'multi_branch'",
    'hidden': "mlp hidden widths, e.g. [64, 32]",
    'branches': "multi_branch: {temporal: [...], spatial: [...], frequency: [...]} widths",
    'fusion_dim': "multi_branch fusion / attention width",
    'attention': "multi_branch: self-attention over the branch outputs",
    'heads': "attention heads (must divide fusion_dim)",
    'head': "multi_branch classifier widths after fusion",
    'dropout': "dropout probability",
    'batch_norm': "batch normalization after each hidden layer",
    'loss': "'ce', 'weighted_ce' or 'focal'",
    'lr': "base learning rate (one-cycle peak is 3x)",
    'weight_decay': "AdamW decoupled weight decay",
    'batch_size': "mini-batch size",
    'epochs': "training epochs",
}

Evaluator = Callable[[ArchitectureDescriptor, int, str], Tuple[HistoryRecord, Optional[Model]]]


@dataclass
class Strategy:
    direction: str
    menus: Dict[str, Any] = field(default_factory=dict)
    space: Optional[SearchSpace] = None
    warnings: List[str] = field(default_factory=list)

    def to_text(self) -> str:
        text = self.direction.strip()
        if self.menus:
            text += "\nMenus: " + json.dumps(self.menus, sort_keys=True)
        return text


@dataclass
class SearchCall:
    """One LLM exchange made during the search"""
    iteration: int
    role: str
    digest: str
    response: str

    def to_dict(self) -> Dict[str, Any]:
        return {'iteration': self.iteration, 'role': self.role, 'digest': self.digest,
                'response': self.response}


@dataclass
class IterationLog:
    """Everything that happened in one strategist/generator round"""
    iteration: int
    strategy: str = ''
    warnings: List[str] = field(default_factory=list)
    candidates: List[Dict[str, Any]] = field(default_factory=list)
    rejected: List[str] = field(default_factory=list)
    records: List[HistoryRecord] = field(default_factory=list)
    feedback: List[str] = field(default_factory=list)
    calls: List[SearchCall] = field(default_factory=list)
    best_accuracy: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iteration': self.iteration,
            'strategy': self.strategy,
            'warnings': list(self.warnings),
            'candidates': list(self.candidates),
            'rejected': list(self.rejected),
            'records': [r.to_dict() for r in self.records],
            'reports': [r.report.to_dict() if r.report else None for r in self.records],
            'feedback': list(self.feedback),
            'calls': [c.to_dict() for c in self.calls],
            'best_accuracy': self.best_accuracy,
        }


def candidate_seed(run_seed: int, digest: str) -> int:
    """Per-candidate seed derived from the run seed and the design digest"""
    raw = hashlib.sha256(f"{int(run_seed)}:{digest}".encode('utf-8')).hexdigest()
    return int(raw[:8], 16)


def task_description(train_ds: Dataset) -> str:
    task = 'binary' if train_ds.n_classes == 2 else f"{train_ds.n_classes}-class"
    return (f"The task is {task} transient stability classification from {train_ds.dim} "
            f"trajectory features with {len(train_ds)} training samples.")


def _chat(backend, exchange: ChatExchange, role: str, iteration: int,
          calls: Optional[List[SearchCall]]) -> str:
    response = backend.chat(exchange)
    if calls is not None:
        calls.append(SearchCall(iteration, role, exchange.digest, response))
    return response


# --------------------------------------------------------------------------- #
# Roles
# --------------------------------------------------------------------------- #

def strategist_step(history: History, requirements: Requirements, space: SearchSpace, backend,
                    feedback: str = '', system_description: str = '',
                    params: Optional[ChatParams] = None, iteration: int = 0,
                    calls: Optional[List[SearchCall]] = None) -> Strategy:
    """
    Ask the Strategist for a direction and narrowed menus

    The prompt carries the whole history; the transport is stateless.

    Raises:
        BlockParseError: no usable strategy block after one reformat round
    """
    exchange = render('strategist', {
        'persona': NAS_PERSONA,
        'system_description': system_description or "Transient stability classification.",
        'requirements': json.dumps(requirements.to_dict(), sort_keys=True),
        'search_space': json.dumps(space.to_dict(), sort_keys=True),
        'history': history.to_text(),
        'feedback': feedback.strip() or "(none yet)",
    }, params=params)

    def convert(payload: Any) -> Tuple[str, Dict[str, Any]]:
        if not isinstance(payload, dict) or not isinstance(payload.get('direction'), str):
            raise ValueError("strategy needs a 'direction' string")
        menus = payload.get('menus') or {}
        if not isinstance(menus, dict):
            raise ValueError("'menus' must be an object")
        return payload['direction'], menus

    response = _chat(backend, exchange, 'strategist', iteration, calls)
    try:
        direction, menus = convert(parse_block(response, 'strategy'))
    except (BlockParseError, ValueError) as exc:
        print(f"[Search] Strategy unusable ({exc}), asking for a reformat")
        retry = exchange.extended({'role': 'assistant', 'content': response},
                                  {'role': 'user', 'content': reformat_message('strategy')})
        response = _chat(backend, retry, 'strategist', iteration, calls)
        try:
            direction, menus = convert(parse_block(response, 'strategy'))
        except (BlockParseError, ValueError) as exc2:
            raise BlockParseError(f"strategist: {exc2}")

    narrowed, warnings = space.narrowed(menus)
    for warning in warnings:
        print(f"[WARNING] Strategy menu {warning}")
    return Strategy(direction, menus, narrowed, warnings)


def _descriptors(blocks: List[Any]) -> Tuple[List[ArchitectureDescriptor], List[str]]:
    out, problems = [], []
    for i, payload in enumerate(blocks, 1):
        try:
            out.append(ArchitectureDescriptor.from_dict(payload))
        except (ValueError, TypeError) as exc:
            problems.append(f"block {i}: {exc}")
    return out, problems


def generator_step(strategy: Strategy, space: SearchSpace, backend, n_candidates: int = 4,
                   system_description: str = '', params: Optional[ChatParams] = None,
                   iteration: int = 0, calls: Optional[List[SearchCall]] = None) -> List[ArchitectureDescriptor]:
    """
    Ask the Generator for candidate descriptors under ``strategy``

    The prompt holds the strategy and the (narrowed) space only, never the
    history. Duplicates are passed through; the Operator rejects them.

    Raises:
        BlockParseError: zero parseable candidates after one reformat round
    """
    menu_space = strategy.space or space
    exchange = render('generator', {
        'persona': NAS_PERSONA,
        'system_description': system_description or "Transient stability classification.",
        'strategy': strategy.to_text(),
        'search_space': json.dumps(menu_space.to_dict(), sort_keys=True),
        'n_candidates': int(n_candidates),
        'schema': json.dumps(ARCH_SCHEMA, indent=2),
    }, params=params)

    response = _chat(backend, exchange, 'generator', iteration, calls)
    blocks, problems = extract_blocks(response, 'architecture')
    candidates, invalid = _descriptors(blocks)
    problems += invalid
    if candidates:
        return candidates[:n_candidates]

    print(f"[Search] Generator produced no usable candidate, asking for a reformat")
    follow_up = render_text('operator', {
        'errors': '\n'.join(f"- {p}" for p in problems) or "- no architecture block found",
        'strategy': strategy.to_text(),
    }) + "\n\n" + reformat_message('architecture', multi=True)
    retry = exchange.extended({'role': 'assistant', 'content': response},
                              {'role': 'user', 'content': follow_up})
    response = _chat(backend, retry, 'operator', iteration, calls)
    blocks, problems = extract_blocks(response, 'architecture')
    candidates, invalid = _descriptors(blocks)
    if not candidates:
        raise BlockParseError(f"generator: no usable candidate ({'; '.join(problems + invalid) or 'no blocks'})")
    return candidates[:n_candidates]


def operator_validate(desc: ArchitectureDescriptor, space: SearchSpace, archive: Archive) -> bool:
    """Legal iff every field is in its menu and the design was never visited"""
    return space.contains(desc) and desc.digest not in archive


def evaluate_candidate(desc: ArchitectureDescriptor, train_ds: Dataset, val_ds: Dataset,
                       requirements: Requirements, iteration: int = 1, strategy: str = '',
                       epoch_budget: Optional[int] = None, seed: int = 0,
                       history: Optional[History] = None, archive: Optional[Archive] = None,
                       quiet: bool = True) -> Tuple[HistoryRecord, Optional[Model]]:
    """
    Train one candidate under the epoch budget and record (P, C, L)

    A design whose analytic parameter count exceeds the budget is rejected
    before training; an aborted run is recorded with accuracy 0. Both are
    still archived.
    """
    desc = desc.with_seed(candidate_seed(seed, desc.digest))
    n_params = desc.param_count(train_ds.dim, train_ds.n_classes)
    model = None

    if n_params > requirements.lambda_params:
        print(f"[Search] Rejecting {desc.digest}: {n_params:,} parameters > {requirements.lambda_params:,}")
        record = HistoryRecord(iteration, desc, 0.0, n_params, 0.0, strategy, status='rejected')
    else:
        model = instantiate(desc, train_ds.dim, train_ds.n_classes)
        report = train(model, train_ds, val_ds, epochs=epoch_budget, quiet=quiet)
        if report.aborted:
            record = HistoryRecord(iteration, desc, 0.0, n_params, report.latency_ms, strategy,
                                   status='aborted', report=report)
            model = None
        else:
            record = HistoryRecord(iteration, desc, report.best_val_accuracy, n_params, report.latency_ms,
                                   strategy, train_accuracy=report.train_accuracy,
                                   metrics=report.metrics, report=report)

    if archive is not None:
        archive.add(desc.digest)
    if history is not None:
        history.append(record)
    return record, model


# --------------------------------------------------------------------------- #
# Search loop
# --------------------------------------------------------------------------- #

def search(train_ds: Dataset, val_ds: Dataset, requirements: Requirements, space: SearchSpace, backend,
           test_ds: Optional[Dataset] = None, n_candidates: int = 4, epoch_budget: int = 30,
           seed: int = 0, evaluator: Optional[Evaluator] = None,
           search_dir: Union[str, Path, None] = None, params: Optional[ChatParams] = None,
           retrain_best: bool = True, quiet: bool = True) -> SearchResult:
    """
    Strategist -> Generator -> Operator until the target accuracy is met or
    ``requirements.t_max`` iterations have run

    The best design is the most accurate feasible one (parameter and latency
    limits met); earlier records win ties.

    Raises:
        SearchError: no feasible design was found
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise SearchError("training and validation splits must be non-empty")
    if space.size == 0:
        raise SearchError("search space holds no valid descriptor")

    history, archive = History(), Archive()
    description = task_description(train_ds)
    logs: List[IterationLog] = []
    best_model: Optional[Model] = None
    best: Optional[HistoryRecord] = None
    best_so_far: List[float] = []
    feedback_text = ''
    stop_reason = 'iterations_exhausted'

    if evaluator is None:
        def evaluator(desc: ArchitectureDescriptor, iteration: int, strategy: str):
            return evaluate_candidate(desc, train_ds, val_ds, requirements, iteration, strategy,
                                      epoch_budget=epoch_budget, seed=seed, quiet=quiet)

    print(f"\n[Search] {description} Space of {space.size} designs, up to {requirements.t_max} iteration(s)")
    for t in range(1, requirements.t_max + 1):
        log = IterationLog(iteration=t)
        logs.append(log)
        try:
            strategy = strategist_step(history, requirements, space, backend, feedback_text, description,
                                       params, t, log.calls)
            log.strategy, log.warnings = strategy.to_text(), list(strategy.warnings)
            candidates = generator_step(strategy, space, backend, n_candidates, description, params, t, log.calls)
        except BlockParseError as exc:
            print(f"[Search] Iteration {t}: no candidates ({exc})")
            candidates = []

        for desc in tqdm(candidates, desc=f"Iteration {t}", disable=quiet):
            log.candidates.append(desc.to_dict())
            if not operator_validate(desc, space, archive):
                reason = 'already evaluated' if desc.digest in archive else '; '.join(space.violations(desc))
                log.rejected.append(f"{desc.digest}: {reason}")
                print(f"[Search] Operator rejected {desc.digest}: {reason}")
                continue
            archive.add(desc.digest)
            record, model = evaluator(desc, t, log.strategy)
            history.append(record)
            record.feedback = feedback_report(record, requirements).to_text()
            log.records.append(record)
            log.feedback.append(record.feedback)
            if record.feasible(requirements) and (best is None or record.accuracy > best.accuracy):
                best, best_model = record, model
            print(f"[Search] {record.digest} {record.descriptor.summary()}: val {record.accuracy:.4f}, "
                  f"{record.param_count:,} params, {record.latency_ms:.3f} ms ({record.status})")

        if not log.records:
            print(f"[Search] Iteration {t} produced no valid candidate")
        log.best_accuracy = best.accuracy if best else 0.0
        best_so_far.append(log.best_accuracy)
        feedback_text = '\n\n'.join(log.feedback)
        if search_dir is not None:
            save_search_iteration(search_dir, log)

        if best is not None and best.accuracy >= requirements.p_target:
            stop_reason = 'target_met'
            print(f"[Search] Target {requirements.p_target:.3f} met at iteration {t}")
            break

    if best is None:
        raise SearchError(f"no feasible architecture found in {len(logs)} iteration(s) "
                          f"({len(history)} evaluated)")

    model = best_model
    if model is not None and retrain_best and best.descriptor.epochs > epoch_budget:
        print(f"[Search] Retraining {best.digest} for the full {best.descriptor.epochs} epochs")
        model = instantiate(best.descriptor, train_ds.dim, train_ds.n_classes)
        train(model, train_ds, val_ds, quiet=quiet)

    result = SearchResult(
        best=best.descriptor,
        best_accuracy=best.accuracy,
        history=history,
        archive=archive,
        stop_reason=stop_reason,
        iterations=len(logs),
        best_record=best,
        weights=model.state_dict() if model is not None else None,
        test_metrics=evaluate(model, test_ds) if model is not None and test_ds is not None else None,
        best_so_far=best_so_far,
    )
    if search_dir is not None:
        save_search_run(search_dir, result, logs, model)
    return result
