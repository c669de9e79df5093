"""
Table creation helpers for terminal summaries.
"""
from typing import Any, Dict, Optional

from rich import box
from rich.console import Console
from rich.table import Table

_OUTCOME_STYLES = {
    'stable': '[green]stable[/green]',
    'unstable': '[red]unstable[/red]',
}


def outcome_marker(outcome: str) -> str:
    """Colored label for a binary outcome; other strings pass through"""
    return _OUTCOME_STYLES.get(outcome, outcome)


def create_simulation_table(scenario, traj, label) -> Table:
    """
    Label, violation times and solver status of one simulation.

    Args:
        scenario: the simulated Scenario
        traj: its Trajectory
        label: StabilityLabel from classify()
    """
    table = Table.grid(padding=(0, 2))
    table.add_column(style="cyan")
    table.add_column(style="bold yellow")
    table.add_row("Scenario", f"{scenario.fault_kind} at {scenario.location}, "
                              f"cleared after {scenario.clearing_duration * 1000:.0f} ms")
    table.add_row("Outcome", outcome_marker(label.binary))
    for report in label.reports:
        when = f"t={report.time:.3f}s" if report.violated else "ok"
        detail = ', '.join(f"{k}={v}" for k, v in sorted(report.detail.items()))
        table.add_row(f"  {report.criterion}", when + (f" ({detail})" if detail else ''))
    table.add_row("Converged", "yes" if traj.converged else f"no (aborted at {traj.abort_time:.3f}s)")
    table.add_row("Samples", str(traj.n_points))
    return table


def create_campaign_table(summary: Dict[str, Any]) -> Table:
    """Counts, validity rate and wall time of a campaign"""
    table = Table(box=box.ROUNDED, header_style="bold cyan", title="Campaign")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right", style="bold yellow")
    table.add_row("Sub-requests", str(summary.get('subrequests', 0)))
    table.add_row("LLM calls", str(summary.get('llm_calls', 0)))
    table.add_row("Drafted scenarios", str(summary.get('drafted', 0)))
    table.add_row("Valid and integrated", str(summary.get('integrated', 0)))
    table.add_row("Validity rate", f"{summary.get('validity_rate', 0.0):.1%}")
    hint = summary.get('hint_agreement')
    table.add_row("Hint agreement", f"{hint:.1%}" if hint is not None else "-")
    for name, count in sorted((summary.get('outcomes') or {}).items()):
        table.add_row(f"  {name}", str(count))
    table.add_row("Dataset samples", str(summary.get('dataset_size', 0)))
    table.add_row("Class counts", str(summary.get('dataset_class_counts', [])))
    table.add_row("Wall time", f"{summary.get('wall_time_s', 0.0):.1f} s")
    return table


def create_history_table(history, best_digest: Optional[str] = None) -> Table:
    """One row per evaluated design; the best one is highlighted"""
    table = Table(box=box.SIMPLE_HEAVY, header_style="bold cyan", title="Search history")
    table.add_column("#", justify="right", style="dim")
    table.add_column("Digest", style="magenta")
    table.add_column("Architecture")
    table.add_column("Val acc", justify="right")
    table.add_column("Params", justify="right")
    table.add_column("Latency", justify="right")
    table.add_column("Status")
    for record in history:
        style = "bold green" if record.digest == best_digest else None
        table.add_row(str(record.iteration), record.digest, record.descriptor.summary(),
                      f"{record.accuracy:.4f}", f"{record.param_count:,}",
                      f"{record.latency_ms:.3f} ms", record.status, style=style)
    return table


def create_metrics_table(metrics, param_count: Optional[int] = None,
                         latency_ms: Optional[float] = None, title: str = "Test metrics") -> Table:
    """Accuracy, macro-F1, AUC (binary), parameters and latency"""
    table = Table(box=box.ROUNDED, header_style="bold cyan", title=title)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right", style="bold yellow")
    table.add_row("Accuracy", f"{metrics.accuracy:.4f}")
    table.add_row("Macro-F1", f"{metrics.macro_f1:.4f}")
    if metrics.n_classes == 2:
        table.add_row("AUC-ROC", f"{metrics.auc_roc:.4f}" if metrics.auc_roc is not None else "n/a")
    for cls, (p, r, f) in enumerate(zip(metrics.precision, metrics.recall, metrics.f1)):
        table.add_row(f"  class {cls} P/R/F1", f"{p:.3f} / {r:.3f} / {f:.3f}")
    if param_count is not None:
        table.add_row("Parameters", f"{param_count:,}")
    if latency_ms is not None:
        table.add_row("Latency", f"{latency_ms:.3f} ms/sample")
    return table


def print_table(table: Table, console: Optional[Console] = None) -> None:
    (console or Console()).print(table)
