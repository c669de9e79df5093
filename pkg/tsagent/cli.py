"""
Command-line interface for tsagent.

    tsagent simulate scenario.json --case wscc9
    tsagent campaign "Generate a balanced dataset of 500 three-phase faults" --offline
    tsagent search --dataset runs/run-.../dataset.tsds
    tsagent pipeline "Sweep clearing times 50-500 ms for a fault at bus 7" --seed 3
    tsagent eval --model runs/.../search/best.tsw --dataset runs/.../dataset.tsds

Exit codes: 0 success, 1 unexpected error, 2 validation error, 3 integration
failure, 4 campaign or search failure, 5 configuration error.
"""

import argparse
import contextlib
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION = 2
EXIT_INTEGRATION = 3
EXIT_STAGE_FAILED = 4
EXIT_CONFIG = 5


def _build_parser() -> argparse.ArgumentParser:
    from . import __version__

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=argparse.SUPPRESS,
                        help='Run configuration file (default: the global config.json)')
    common.add_argument('--offline', action='store_true', default=argparse.SUPPRESS,
                        help='Force the mock backend with the offline policy')
    common.add_argument('--seed', type=int, default=argparse.SUPPRESS,
                        help='Override the campaign/search seed')
    common.add_argument('--out', default=argparse.SUPPRESS,
                        help='Root directory for run directories')

    parser = argparse.ArgumentParser(
        prog='tsagent',
        description='LLM agents for transient stability simulation, datasets and model search.',
        parents=[common],
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='command')

    simulate = subparsers.add_parser('simulate', parents=[common],
                                     help='Simulate one scenario file and print its label')
    simulate.add_argument('scenario', help='Scenario JSON file')
    simulate.add_argument('--case', default=None, help='Bundled case name or case file (default: from config)')
    simulate.add_argument('-o', '--output', default=None,
                          help='Trajectory record path (default: <out>/<scenario>.tstr)')

    campaign = subparsers.add_parser('campaign', parents=[common],
                                     help='Turn a request into a labeled, balanced dataset')
    campaign.add_argument('request', nargs='?', default=None, help='Request text')
    campaign.add_argument('--request-file', default=None, help='Read the request from a file')

    search = subparsers.add_parser('search', parents=[common],
                                   help='Search architectures for a saved dataset')
    search.add_argument('--dataset', required=True, help='.tsds dataset file')

    pipeline = subparsers.add_parser('pipeline', parents=[common],
                                     help='Campaign then search in one run directory')
    pipeline.add_argument('request', nargs='?', default=None, help='Request text')
    pipeline.add_argument('--request-file', default=None, help='Read the request from a file')

    evaluate = subparsers.add_parser('eval', parents=[common],
                                     help="Evaluate saved weights on a dataset's test split")
    evaluate.add_argument('--model', required=True, help='.tsw weights file')
    evaluate.add_argument('--dataset', required=True, help='.tsds dataset file')
    evaluate.add_argument('--json', action='store_true', help='Print metrics as JSON on stdout')

    return parser


def _run_config(args: argparse.Namespace):
    from .config import load_run_config

    config_path = getattr(args, 'config', None)
    cfg = load_run_config(Path(config_path) if config_path else None)
    return cfg.with_overrides(seed=getattr(args, 'seed', None),
                              offline=getattr(args, 'offline', False),
                              output_dir=getattr(args, 'out', None))


def _request_text(args: argparse.Namespace) -> str:
    if args.request_file:
        return Path(args.request_file).read_text(encoding='utf-8').strip()
    return (args.request or '').strip()


def _load_case(name: str):
    from .grid import bundled_case, list_cases, load_case

    return bundled_case(name) if name in list_cases() else load_case(name)


def _label_record(label) -> dict:
    return {'binary': label.binary, 'multiclass': label.multiclass, 'violated': label.violated}


def _cmd_simulate(args: argparse.Namespace) -> int:
    from .core import classify
    from .dataset import write_trajectories
    from .errors import CaseFormatError, NetworkError, PowerFlowError, StagingError
    from .models.scenario import Scenario, issues_to_text
    from .sim import check_scenario, simulate
    from .ui.tables import create_simulation_table, print_table

    cfg = _run_config(args)
    try:
        case = _load_case(args.case or cfg.case)
    except CaseFormatError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION

    path = Path(args.scenario)
    try:
        raw = json.loads(path.read_text(encoding='utf-8'))
        if isinstance(raw, dict):
            raw.pop('rationale', None)
        scenario_id = (raw.get('id') if isinstance(raw, dict) else None) or path.stem
        scenario = Scenario.from_dict(raw, scenario_id)
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as e:
        print(f"Error: invalid scenario file {path}: {e}", file=sys.stderr)
        return EXIT_VALIDATION

    issues = check_scenario(scenario, case)
    if issues:
        print(f"Scenario {scenario.id} is not valid for case {case.name}:\n{issues_to_text(issues)}",
              file=sys.stderr)
        return EXIT_VALIDATION

    try:
        traj = simulate(case, scenario)
    except (StagingError, PowerFlowError, NetworkError) as e:
        print(f"Error: integration failed: {e}", file=sys.stderr)
        return EXIT_INTEGRATION

    label = classify(traj, cfg.thresholds)
    print_table(create_simulation_table(scenario, traj, label))
    output = Path(args.output) if args.output else Path(cfg.output_dir) / f"{path.stem}.tstr"
    output.parent.mkdir(parents=True, exist_ok=True)
    write_trajectories([traj], output, [_label_record(label)])
    print(f"\nTrajectory written to: {output}")
    return EXIT_OK


def _campaign_stage(cfg, request: str, run_dir: Path, artifacts: List[Path]):
    """Run the campaign into ``run_dir``; the transcript is saved even on failure"""
    from .clients import make_backend
    from .clients.base import ChatParams
    from .core.scenario_agent import run_campaign
    from .dataset import write_dataset, write_trajectories
    from .errors import CampaignError
    from .export import campaign_summary, save_transcript, write_json
    from .rag import ingest_corpus, load_corpus
    from .ui.tables import create_campaign_table, print_table

    case = _load_case(cfg.case)
    backend = make_backend(cfg)
    store = ingest_corpus(load_corpus(), backend) if cfg.campaign.use_rag else None
    params = ChatParams(cfg.llm.temperature, cfg.llm.max_tokens, cfg.llm.top_p)

    started = time.monotonic()
    try:
        dataset, transcript, trajectories, labels = run_campaign(
            request, case, cfg.campaign, backend, store=store, thresholds=cfg.thresholds,
            feature_scheme=cfg.feature_scheme, params=params)
    except CampaignError as e:
        if e.transcript is not None:
            artifacts.extend(save_transcript(run_dir, e.transcript))
        raise

    artifacts.extend(save_transcript(run_dir, transcript))
    artifacts.append(write_dataset(dataset, run_dir / 'dataset.tsds'))
    artifacts.append(write_trajectories(trajectories, run_dir / 'trajectories.tstr',
                                        [_label_record(label) for label in labels]))
    summary = campaign_summary(transcript, dataset, time.monotonic() - started)
    artifacts.append(write_json(run_dir / 'summary.json', summary))
    print_table(create_campaign_table(summary))
    return dataset


def _search_stage(cfg, dataset, run_dir: Path, artifacts: List[Path]):
    from .clients import make_backend
    from .clients.base import ChatParams
    from .core.nas import search
    from .dataset import select_features, split
    from .export import write_json
    from .models.architecture import search_space_preset
    from .ui.tables import create_history_table, create_metrics_table, print_table

    train_ds, val_ds, test_ds = split(dataset, seed=cfg.seed)
    columns = None
    if cfg.select_k:
        columns = [int(c) for c in select_features(train_ds.x, train_ds.y, cfg.select_k)]
        train_ds, val_ds, test_ds = (ds.select_columns(columns) for ds in (train_ds, val_ds, test_ds))
    artifacts.append(write_json(run_dir / 'search' / 'features.json',
                                {'split_seed': cfg.seed, 'columns': columns, 'names': list(train_ds.names)}))

    backend = make_backend(cfg)
    params = ChatParams(cfg.llm.temperature, cfg.llm.max_tokens, cfg.llm.top_p)
    result = search(train_ds, val_ds, cfg.requirements, search_space_preset(cfg.search_space), backend,
                    test_ds=test_ds, n_candidates=cfg.n_candidates, epoch_budget=cfg.epoch_budget,
                    seed=cfg.seed, search_dir=run_dir / 'search', params=params)
    artifacts.extend(p for p in (run_dir / 'search').rglob('*') if p.is_file())

    print_table(create_history_table(result.history, result.best.digest))
    print(f"\nBest {result.best.digest} ({result.best.summary()}): val accuracy {result.best_accuracy:.4f}, "
          f"stop reason {result.stop_reason}")
    if result.test_metrics is not None:
        print_table(create_metrics_table(result.test_metrics, result.best_record.param_count,
                                         result.best_record.latency_ms))
    return result


def _cmd_run(args: argparse.Namespace, stages: List[str]) -> int:
    """Shared driver of campaign, search and pipeline"""
    from .config import get_runs_dir
    from .dataset import read_dataset
    from .errors import CampaignError, ContainerError, CorpusError, DatasetError, LLMError, SearchError
    from .export import new_run_dir, save_config_snapshot, write_manifest

    cfg = _run_config(args)
    request = ''
    if 'campaign' in stages:
        request = _request_text(args)
        if not request:
            print("Error: a request text (or --request-file) is required", file=sys.stderr)
            return EXIT_VALIDATION
    if cfg.backend.get('kind') == 'remote':
        # fail on a missing key before creating any run directory
        from .clients import make_backend
        make_backend(cfg)

    root = Path(cfg.output_dir) if cfg.output_dir else get_runs_dir()
    run_dir = new_run_dir(root, cfg.seed)
    artifacts: List[Path] = [save_config_snapshot(run_dir, cfg)]
    status = {name: 'skipped' for name in stages}
    print(f"[Run] Writing to {run_dir}")

    code = EXIT_OK
    try:
        if 'campaign' in stages:
            status['campaign'] = 'failed'
            dataset = _campaign_stage(cfg, request, run_dir, artifacts)
            status['campaign'] = 'ok'
        else:
            dataset = read_dataset(args.dataset)
        if 'search' in stages:
            status['search'] = 'failed'
            _search_stage(cfg, dataset, run_dir, artifacts)
            status['search'] = 'ok'
    except (CampaignError, SearchError, DatasetError, ContainerError, CorpusError, LLMError) as e:
        print(f"Error: {e}", file=sys.stderr)
        code = EXIT_STAGE_FAILED
    finally:
        write_manifest(run_dir, args.command, cfg.seed, status, artifacts,
                       extra={'request': request} if request else None)
    print(f"\nRun directory: {run_dir}")
    return code


def _cmd_eval(args: argparse.Namespace) -> int:
    from .dataset import read_dataset, split
    from .dataset.container import read_container
    from .errors import ContainerError, DatasetError
    from .export import read_json
    from .nn import evaluate, load_weights
    from .nn.trainer import measure_latency
    from .ui.tables import create_metrics_table, print_table

    cfg = _run_config(args)
    # with --json, stdout carries only the metrics document
    progress_ctx = contextlib.redirect_stdout(sys.stderr) if args.json else contextlib.nullcontext()
    try:
        with progress_ctx:
            model = load_weights(args.model)
            header, _ = read_container(args.model, 'weights')
            dataset = read_dataset(args.dataset)
            features_path = Path(args.model).parent / 'features.json'
            features = read_json(features_path) if features_path.is_file() else {}
            seed = int(features.get('split_seed', dataset.metadata.get('split_seed', cfg.seed)))
            _, _, test_ds = split(dataset, seed=seed)
            if features.get('columns'):
                test_ds = test_ds.select_columns(features['columns'])
            if test_ds.dim != model.input_dim:
                print(f"Error: model expects {model.input_dim} features, dataset has {test_ds.dim}",
                      file=sys.stderr)
                return EXIT_VALIDATION
            metrics = evaluate(model, test_ds)
            latency = measure_latency(model, test_ds.x)
    except (ContainerError, DatasetError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_STAGE_FAILED

    if args.json:
        doc = metrics.to_dict()
        doc.update(digest=header.get('digest'), samples=len(test_ds), split_seed=seed,
                   param_count=model.param_count, latency_ms=latency)
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    print(f"Model {header.get('digest', '?')} on {len(test_ds)} test samples (split seed {seed})")
    print_table(create_metrics_table(metrics, model.param_count, latency))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    from .errors import ConfigError

    argv = sys.argv[1:] if argv is None else argv
    parser = _build_parser()
    args = parser.parse_args(argv)

    handlers = {
        'simulate': _cmd_simulate,
        'campaign': lambda a: _cmd_run(a, ['campaign']),
        'search': lambda a: _cmd_run(a, ['search']),
        'pipeline': lambda a: _cmd_run(a, ['campaign', 'search']),
        'eval': _cmd_eval,
    }
    handler = handlers.get(args.command)
    if handler is None:
        parser.print_help()
        return EXIT_OK
    try:
        return handler(args)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("\nInterrupted.", file=sys.stderr)
        return EXIT_UNEXPECTED
    except Exception as e:
        print(f"Unexpected error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == '__main__':
    sys.exit(main())
