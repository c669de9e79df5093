"""
Run directories and the artifacts written into them.

Layout of one run:

    run-<timestamp>-<seed>/
        config.json          config snapshot (no secrets)
        transcript.log       human-readable agent transcript
        transcript.json      the same, machine-readable
        dataset.tsds         balanced dataset
        trajectories.tstr    integrated trajectories with labels
        search/              per-iteration strategy, candidates, reports, feedback
        manifest.json        versions, seeds, stage status and artifact list
"""

import json
import platform
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

PathLike = Union[str, Path]


def _timestamp(now: Optional[datetime] = None) -> str:
    return (now or datetime.now()).strftime('%Y%m%d-%H%M%S')


def new_run_dir(root: PathLike, seed: int, now: Optional[datetime] = None) -> Path:
    """Create ``run-<timestamp>-<seed>`` under ``root``; a numeric suffix avoids clashes"""
    root = Path(root).expanduser()
    root.mkdir(parents=True, exist_ok=True)
    base = f"run-{_timestamp(now)}-{seed}"
    target = root / base
    n = 1
    while target.exists():
        n += 1
        target = root / f"{base}-{n}"
    target.mkdir()
    return target


def write_json(path: PathLike, data: Any) -> Path:
    """Pretty JSON written through a temp file and renamed into place"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp = path.with_suffix(path.suffix + '.tmp')
    try:
        with temp.open('w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False, default=_jsonable)
        temp.replace(path)
    finally:
        if temp.exists():
            temp.unlink(missing_ok=True)
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def read_json(path: PathLike) -> Any:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


# --------------------------------------------------------------------------- #
# Campaign artifacts
# --------------------------------------------------------------------------- #

def save_config_snapshot(run_dir: PathLike, run_config) -> Path:
    return write_json(Path(run_dir) / 'config.json', run_config.to_dict())


def save_transcript(run_dir: PathLike, transcript) -> List[Path]:
    """transcript.log and transcript.json"""
    run_dir = Path(run_dir)
    log_path = run_dir / 'transcript.log'
    log_path.write_text(transcript.to_text(), encoding='utf-8')
    data = transcript.to_dict()
    data['digest'] = transcript.digest
    return [log_path, write_json(run_dir / 'transcript.json', data)]


def campaign_summary(transcript, dataset, wall_time: float) -> Dict[str, Any]:
    return {
        'request': transcript.request,
        'subrequests': len(transcript.subrequests),
        'llm_calls': len(transcript.attempts),
        'drafted': transcript.drafted,
        'integrated': transcript.integrated,
        'validity_rate': round(transcript.validity_rate, 6),
        'hint_agreement': transcript.hint_agreement,
        'outcomes': dict(transcript.class_counts),
        'dataset_size': len(dataset),
        'dataset_class_counts': dataset.class_counts(),
        'feature_dim': dataset.dim,
        'wall_time_s': round(wall_time, 3),
    }


# --------------------------------------------------------------------------- #
# Search artifacts
# --------------------------------------------------------------------------- #

def _iteration_dir(search_dir: PathLike, iteration: int) -> Path:
    target = Path(search_dir) / f"iteration-{iteration:02d}"
    target.mkdir(parents=True, exist_ok=True)
    return target


def save_search_iteration(search_dir: PathLike, log) -> Path:
    """strategy.txt, candidates.json, reports.json, feedback.txt and calls.json for one iteration"""
    target = _iteration_dir(search_dir, log.iteration)
    data = log.to_dict()
    strategy = log.strategy or "(no strategy)"
    if log.warnings:
        strategy += "\n\nWarnings:\n" + '\n'.join(f"- {w}" for w in log.warnings)
    (target / 'strategy.txt').write_text(strategy + '\n', encoding='utf-8')
    write_json(target / 'candidates.json', {'candidates': data['candidates'], 'rejected': data['rejected']})
    write_json(target / 'reports.json', {'records': data['records'], 'reports': data['reports']})
    (target / 'feedback.txt').write_text('\n\n'.join(log.feedback) + '\n' if log.feedback else '',
                                         encoding='utf-8')
    write_json(target / 'calls.json', data['calls'])
    return target


def build_search_report(result) -> str:
    """Markdown summary of a finished search"""
    lines = ["# Architecture Search Report", ""]
    lines.append(f"**Stop reason:** {result.stop_reason}  ")
    lines.append(f"**Iterations:** {result.iterations}  ")
    lines.append(f"**Designs evaluated:** {len(result.archive)}")
    lines.append("")
    lines.append("## Best architecture")
    lines.append("")
    lines.append(f"`{result.best.digest}` {result.best.summary()}")
    lines.append("")
    lines.append("| Metric | Value |")
    lines.append("|---|---|")
    lines.append(f"| Validation accuracy | {result.best_accuracy:.4f} |")
    if result.best_record is not None:
        lines.append(f"| Parameters | {result.best_record.param_count:,} |")
        lines.append(f"| Latency (ms/sample) | {result.best_record.latency_ms:.3f} |")
    metrics = result.test_metrics
    if metrics is not None:
        lines.append(f"| Test accuracy | {metrics.accuracy:.4f} |")
        lines.append(f"| Test macro-F1 | {metrics.macro_f1:.4f} |")
        if metrics.auc_roc is not None:
            lines.append(f"| Test AUC | {metrics.auc_roc:.4f} |")
    lines.append("")
    lines.append("## Best accuracy per iteration")
    lines.append("")
    for i, value in enumerate(result.best_so_far, 1):
        lines.append(f"- iteration {i}: {value:.4f}")
    lines.append("")
    lines.append("## History")
    lines.append("")
    frame = result.history.to_frame()
    if len(frame):
        lines.append("| " + " | ".join(frame.columns) + " |")
        lines.append("|" + "---|" * len(frame.columns))
        for row in frame.itertuples(index=False):
            lines.append("| " + " | ".join(str(v) for v in row) + " |")
    else:
        lines.append("(empty)")
    return '\n'.join(lines) + '\n'


def save_search_run(search_dir: PathLike, result, logs: Sequence = (), model=None) -> List[Path]:
    """result.json, history.csv, best_descriptor.json, report.md and best.tsw"""
    from .nn.model import save_weights

    search_dir = Path(search_dir)
    search_dir.mkdir(parents=True, exist_ok=True)
    for log in logs:
        save_search_iteration(search_dir, log)
    paths = [
        write_json(search_dir / 'result.json', result.to_dict()),
        write_json(search_dir / 'best_descriptor.json', result.best.to_dict()),
    ]
    history_path = search_dir / 'history.csv'
    result.history.to_frame().to_csv(history_path, index=False)
    paths.append(history_path)
    report_path = search_dir / 'report.md'
    report_path.write_text(build_search_report(result), encoding='utf-8')
    paths.append(report_path)
    if model is not None:
        paths.append(save_weights(model, search_dir / 'best.tsw',
                                  extra={'best_accuracy': result.best_accuracy,
                                         'stop_reason': result.stop_reason}))
    return paths


# --------------------------------------------------------------------------- #
# Manifest
# --------------------------------------------------------------------------- #

def versions() -> Dict[str, str]:
    import pandas
    import scipy
    import sklearn

    from . import __version__
    return {
        'tsagent': __version__,
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pandas.__version__,
        'scikit-learn': sklearn.__version__,
    }


def write_manifest(run_dir: PathLike, command: str, seed: int, stages: Dict[str, str],
                   artifacts: Sequence[PathLike], extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    manifest.json linking every artifact of the run

    ``stages`` maps stage name to 'ok', 'failed' or 'skipped'.
    """
    run_dir = Path(run_dir)
    listed = []
    for path in artifacts:
        path = Path(path)
        try:
            listed.append(str(path.relative_to(run_dir)))
        except ValueError:
            listed.append(str(path))
    manifest = {
        'command': command,
        'created': datetime.now().isoformat(timespec='seconds'),
        'seed': seed,
        'versions': versions(),
        'stages': dict(stages),
        'artifacts': sorted(set(listed)),
    }
    manifest.update(extra or {})
    return write_json(run_dir / 'manifest.json', manifest)
