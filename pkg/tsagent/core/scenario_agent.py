"""
Scenario agent: natural-language request -> validated scenarios -> dataset

The agent decomposes a request into sub-requests, drafts one scenario per
sub-request through the LLM, validates each draft against the case and feeds
validation errors back until the draft passes or the retry budget runs out.
Sweeps and dataset goals are expanded locally from the drafted template.
"""

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..clients.base import ChatExchange, ChatParams
from ..config import CampaignSettings
from ..dataset.balance import assemble
from ..dataset.features import extract_features
from ..errors import (
    BlockParseError,
    CampaignError,
    DatasetError,
    NetworkError,
    PowerFlowError,
    RepairFailedError,
    StagingError,
)
from ..models.dataset import Dataset, LabeledSample
from ..models.grid import GridCase
from ..models.scenario import (
    BUS_FAULT_KINDS,
    CLASS_NAMES,
    FAULT_KINDS,
    SCENARIO_SCHEMA_VERSION,
    Scenario,
    SimulationConfig,
    StabilityLabel,
    StabilityThresholds,
    Trajectory,
    ValidationIssue,
    issues_to_text,
)
from ..prompts import POWER_PERSONA, format_block, parse_block, reformat_message, render
from ..sim.integrator import simulate
from ..sim.staging import check_scenario
from .labeling import classify

INTENTS = ('fault_scenario', 'sweep', 'dataset_goal')
DEFAULT_SWEEP_STEP_MS = 10.0
DEFAULT_CLEARING_RANGE_MS = (50.0, 500.0)
DEFAULT_LOAD_RANGE = (0.8, 1.2)

SCENARIO_SCHEMA = {
    'fault_kind': f"one of {list(FAULT_KINDS)}",
    'location': "bus id (bus faults), line id (line_trip) or generator id (gen_trip)",
    't_fault': "fault inception in seconds, >= 0",
    't_clear': "clearing time in seconds, > t_fault",
    'r_f': "fault resistance in ohms, >= 0 (bus faults)",
    'x_f': "fault reactance in ohms, >= 0 (bus faults)",
    'clearing_action': "'remove_fault' or 'trip_line' (bus faults)",
    'trip_line': "line id adjacent to the faulted bus when clearing_action is 'trip_line'",
    'load_scale': "uniform load multiplier in [0.1, 2.0], default 1.0",
    'label_hint': "optional expected outcome, 'stable' or 'unstable'",
    'rationale': "one sentence explaining the choice",
}

_INTEGRATION_ERRORS = (StagingError, PowerFlowError, NetworkError)


@dataclass(frozen=True)
class SubRequest:
    """One independent piece of a campaign request"""
    intent: str
    constraints: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.intent not in INTENTS:
            raise ValueError(f"intent must be one of {INTENTS}, got {self.intent!r}")
        if not isinstance(self.constraints, dict):
            raise ValueError("constraints must be a JSON object")
        c = self.constraints
        for name in ('clearing_ms', 'load_range'):
            value = c.get(name)
            if isinstance(value, list):
                if len(value) != 2 or not all(isinstance(v, (int, float)) for v in value):
                    raise ValueError(f"{name} range must be two numbers")
                if value[0] > value[1]:
                    raise ValueError(f"{name} range {value} is not ordered")
                if value[0] < 0:
                    raise ValueError(f"{name} range must be non-negative")
        if 'count' in c:
            if not isinstance(c['count'], int) or isinstance(c['count'], bool) or c['count'] < 1:
                raise ValueError(f"count must be an integer >= 1, got {c['count']!r}")
        if 'clearing_step_ms' in c and not float(c['clearing_step_ms']) > 0:
            raise ValueError("clearing_step_ms must be positive")

    @classmethod
    def from_dict(cls, raw: Any) -> 'SubRequest':
        if not isinstance(raw, dict):
            raise ValueError("sub-request must be a JSON object")
        return cls(intent=raw.get('intent'), constraints=dict(raw.get('constraints') or {}))

    def to_dict(self) -> Dict[str, Any]:
        return {'intent': self.intent, 'constraints': dict(self.constraints)}

    def describe(self) -> str:
        details = ', '.join(f"{k}={v}" for k, v in sorted(self.constraints.items()))
        return f"{self.intent.replace('_', ' ')}" + (f" ({details})" if details else '')


@dataclass
class ScenarioDraft:
    """
    A scenario proposed for a sub-request

    ``scenario`` is None when the response could not be turned into one; the
    reason is in ``issues`` with code ``schema``.
    """
    scenario: Optional[Scenario]
    response: str
    rationale: str = ''
    issues: List[ValidationIssue] = field(default_factory=list)
    sub_index: int = 0
    expanded: bool = False

    @property
    def scenario_id(self) -> str:
        return self.scenario.id if self.scenario is not None else ''


@dataclass
class AttemptRecord:
    stage: str
    template: str
    digest: str
    response: str
    outcome: str
    errors: List[str] = field(default_factory=list)
    scenario_id: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {
            'stage': self.stage, 'template': self.template, 'digest': self.digest,
            'response': self.response, 'outcome': self.outcome, 'errors': list(self.errors),
            'scenario_id': self.scenario_id,
        }


@dataclass
class AgentTranscript:
    """Every LLM exchange of a campaign plus the campaign outcome"""
    request: str
    subrequests: List[SubRequest] = field(default_factory=list)
    attempts: List[AttemptRecord] = field(default_factory=list)
    scenarios: List[Scenario] = field(default_factory=list)
    failures: List[Dict[str, Any]] = field(default_factory=list)
    labels: Dict[str, str] = field(default_factory=dict)
    drafted: int = 0
    integrated: int = 0
    class_counts: Dict[str, int] = field(default_factory=dict)

    @property
    def validity_rate(self) -> float:
        """Scenarios that passed validation and integrated, over all drafts"""
        return self.integrated / self.drafted if self.drafted else 0.0

    @property
    def hint_agreement(self) -> Optional[float]:
        """Fraction of hinted scenarios whose label matches the hint"""
        hinted = [s for s in self.scenarios if s.label_hint and s.id in self.labels]
        if not hinted:
            return None
        return sum(self.labels[s.id] == s.label_hint for s in hinted) / len(hinted)

    def record(self, attempt: AttemptRecord) -> AttemptRecord:
        self.attempts.append(attempt)
        return attempt

    def attempts_for(self, scenario_id: str) -> List[AttemptRecord]:
        return [a for a in self.attempts if a.scenario_id == scenario_id]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'request': self.request,
            'subrequests': [sub.to_dict() for sub in self.subrequests],
            'attempts': [a.to_dict() for a in self.attempts],
            'scenarios': [s.to_dict() for s in self.scenarios],
            'failures': list(self.failures),
            'labels': dict(self.labels),
            'drafted': self.drafted,
            'integrated': self.integrated,
            'validity_rate': self.validity_rate,
            'class_counts': dict(self.class_counts),
            'hint_agreement': self.hint_agreement,
        }

    @property
    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'), default=str)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]

    def to_text(self) -> str:
        """Human-readable log, one section per exchange"""
        lines = [f"REQUEST: {self.request}", ""]
        for i, sub in enumerate(self.subrequests):
            lines.append(f"SUB-REQUEST {i}: {sub.describe()}")
        for n, attempt in enumerate(self.attempts, 1):
            lines.append("")
            lines.append(f"=== exchange {n} | {attempt.stage} | {attempt.template} | "
                         f"{attempt.digest} | {attempt.outcome}"
                         + (f" | {attempt.scenario_id}" if attempt.scenario_id else ''))
            lines.append(attempt.response.rstrip())
            for error in attempt.errors:
                lines.append(f"  ! {error}")
        lines.append("")
        lines.append(f"SUMMARY: {self.integrated}/{self.drafted} drafts valid and integrated "
                     f"(validity {self.validity_rate:.1%})")
        if self.class_counts:
            lines.append("CLASSES: " + ', '.join(f"{k}={v}" for k, v in sorted(self.class_counts.items())))
        if self.hint_agreement is not None:
            lines.append(f"HINT AGREEMENT: {self.hint_agreement:.1%}")
        return '\n'.join(lines) + '\n'


def case_summary(case: GridCase) -> Dict[str, Any]:
    """Ids and topology the LLM must respect, as a JSON-ready mapping"""
    return {
        'name': case.name,
        'description': case.describe(),
        'buses': [{'id': bus.id, 'kind': bus.kind} for bus in case.buses],
        'lines': [{'id': line.id, 'from': line.from_bus, 'to': line.to_bus,
                   'in_service': line.in_service} for line in case.lines],
        'generators': [{'id': gen.id, 'bus': gen.bus} for gen in case.generators],
    }


def validate(draft: ScenarioDraft, case: GridCase) -> List[ValidationIssue]:
    """Issues of a draft; empty when it can be simulated"""
    if draft.scenario is None:
        return list(draft.issues) or [ValidationIssue('schema', 'block', "no scenario in the response")]
    return check_scenario(draft.scenario, case)


def _scenario_from_payload(payload: Any, scenario_id: str) -> Tuple[Scenario, str]:
    if not isinstance(payload, dict):
        raise ValueError("scenario block must hold a JSON object")
    data = dict(payload)
    rationale = str(data.pop('rationale', '') or '')
    data.pop('id', None)
    return Scenario.from_dict(data, scenario_id), rationale


class ScenarioAgent:
    """
    Drives the LLM through decomposition, drafting and repair

    Every chat call is recorded in ``transcript`` exactly once.
    """

    def __init__(self, backend, case: GridCase, store=None, params: Optional[ChatParams] = None,
                 max_retries: int = 3, use_rag: bool = True, use_cot: bool = True,
                 use_feedback: bool = True, rag_k: int = 3, seed: int = 0,
                 transcript: Optional[AgentTranscript] = None):
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self.backend = backend
        self.case = case
        self.store = store
        self.params = params or ChatParams()
        self.max_retries = max_retries
        self.use_rag = use_rag and store is not None
        self.use_cot = use_cot
        self.use_feedback = use_feedback
        self.rag_k = rag_k
        self.seed = seed
        self.transcript = transcript or AgentTranscript(request='')
        self._summary = json.dumps(case_summary(case), sort_keys=True)

    # ------------------------------------------------------------------ #
    # Plumbing
    # ------------------------------------------------------------------ #

    def _bindings(self, **slots) -> Dict[str, Any]:
        bindings = {
            'persona': POWER_PERSONA,
            'system_description': self.case.describe(),
            'case_summary': self._summary,
        }
        bindings.update(slots)
        return bindings

    def _context(self, query: str):
        if not self.use_rag:
            return None
        return self.store.retrieve(query, k=self.rag_k)

    def _chat(self, exchange: ChatExchange, stage: str, scenario_id: str = '') -> Tuple[str, AttemptRecord]:
        response = self.backend.chat(exchange)
        attempt = self.transcript.record(AttemptRecord(
            stage=stage, template=exchange.template, digest=exchange.digest,
            response=response, outcome='ok', scenario_id=scenario_id))
        return response, attempt

    def _ask(self, exchange: ChatExchange, tag: str, stage: str, convert, scenario_id: str = ''):
        """
        Chat, parse one ``tag`` block and convert it; one reformat round on failure

        Returns:
            (converted value, response text)

        Raises:
            BlockParseError: still unusable after the reformat round
        """
        response, attempt = self._chat(exchange, stage, scenario_id)
        try:
            return convert(parse_block(response, tag)), response
        except (BlockParseError, ValueError, TypeError) as exc:
            attempt.outcome = 'parse_error'
            attempt.errors.append(str(exc))
            print(f"[Agent] {stage}: unusable '{tag}' block ({exc}), asking for a reformat")

        retry = exchange.extended({'role': 'assistant', 'content': response},
                                  {'role': 'user', 'content': reformat_message(tag)})
        response, attempt = self._chat(retry, 'reformat', scenario_id)
        try:
            return convert(parse_block(response, tag)), response
        except (BlockParseError, ValueError, TypeError) as exc:
            attempt.outcome = 'parse_error'
            attempt.errors.append(str(exc))
            raise BlockParseError(f"{stage}: {exc}")

    # ------------------------------------------------------------------ #
    # Operations
    # ------------------------------------------------------------------ #

    def decompose(self, request: str) -> List[SubRequest]:
        """
        Split a request into independent sub-requests

        Raises:
            ValueError: empty request
            CampaignError: the response holds no usable sub-request
        """
        if not request or not request.strip():
            raise ValueError("request must be a non-empty string")
        if not self.transcript.request:
            self.transcript.request = request

        exchange = render('conversion', self._bindings(request=request.strip()),
                          context=self._context(request), params=self.params, use_cot=self.use_cot)

        def convert(payload):
            items = payload.get('subrequests') if isinstance(payload, dict) else payload
            if not isinstance(items, list):
                raise ValueError("'subrequests' must be a list")
            return [SubRequest.from_dict(item) for item in items]

        try:
            subrequests, _ = self._ask(exchange, 'subrequests', 'decompose', convert)
        except BlockParseError as exc:
            raise CampaignError(f"could not decompose the request: {exc}", self.transcript)
        if not subrequests:
            raise CampaignError("the request did not yield any sub-request", self.transcript)
        self.transcript.subrequests.extend(subrequests)
        print(f"[Agent] Request split into {len(subrequests)} sub-request(s)")
        return subrequests

    def draft(self, sub: SubRequest, index: int = 0, size_hint: Optional[int] = None) -> List[ScenarioDraft]:
        """
        Draft scenarios for one sub-request

        The LLM drafts a template scenario. A valid template of a sweep or a
        dataset goal is expanded locally into one draft per grid point or
        sample; an invalid template is returned alone so it can be repaired
        and expanded afterwards with ``expand``.
        """
        template = self.draft_template(sub, index)
        if template.scenario is None or validate(template, self.case):
            return [template]
        return self.expand(sub, template, size_hint)

    def draft_template(self, sub: SubRequest, index: int = 0) -> ScenarioDraft:
        scenario_id = f"s{index:02d}"
        exchange = render('architecture', self._bindings(
            subrequest=json.dumps(sub.to_dict(), sort_keys=True),
            schema=json.dumps(SCENARIO_SCHEMA, indent=2)),
            context=self._context(sub.describe()), params=self.params, use_cot=self.use_cot)
        try:
            (scenario, rationale), response = self._ask(
                exchange, 'scenario', 'draft', lambda p: _scenario_from_payload(p, scenario_id), scenario_id)
        except BlockParseError as exc:
            response = self.transcript.attempts[-1].response
            return ScenarioDraft(None, response, issues=[ValidationIssue('schema', 'block', str(exc))],
                                 sub_index=index)
        draft = ScenarioDraft(scenario, response, rationale, sub_index=index)
        draft.issues = validate(draft, self.case)
        if draft.issues:
            self.transcript.attempts[-1].outcome = 'invalid'
            self.transcript.attempts[-1].errors.extend(str(i) for i in draft.issues)
        return draft

    def repair(self, draft: ScenarioDraft, errors: Sequence[ValidationIssue],
               max_retries: Optional[int] = None) -> Scenario:
        """
        Feed validation errors back until the scenario validates

        Raises:
            RepairFailedError: still invalid after ``max_retries`` attempts,
                carrying the last error list
        """
        issues = list(errors)
        if not issues and draft.scenario is not None:
            return draft.scenario
        budget = self.max_retries if max_retries is None else max_retries
        scenario_id = draft.scenario_id or f"s{draft.sub_index:02d}"
        previous = draft.response

        for attempt_no in range(1, budget + 1):
            errors_text = issues_to_text(issues)
            exchange = render('feedback', self._bindings(errors=errors_text, previous_response=previous),
                              context=self._context(errors_text), params=self.params, use_cot=self.use_cot)
            response, attempt = self._chat(exchange, 'repair', scenario_id)
            try:
                scenario, rationale = _scenario_from_payload(parse_block(response, 'scenario'), scenario_id)
                candidate = ScenarioDraft(scenario, response, rationale, sub_index=draft.sub_index,
                                          expanded=draft.expanded)
            except (BlockParseError, ValueError, TypeError) as exc:
                candidate = ScenarioDraft(None, response, issues=[ValidationIssue('schema', 'block', str(exc))],
                                          sub_index=draft.sub_index)
            issues = validate(candidate, self.case)
            if not issues:
                print(f"[Agent] {scenario_id} repaired after {attempt_no} attempt(s)")
                return candidate.scenario
            attempt.outcome = 'invalid' if candidate.scenario is not None else 'parse_error'
            attempt.errors.extend(str(i) for i in issues)
            previous = response

        raise RepairFailedError(f"scenario {scenario_id} still invalid after {budget} repair attempt(s)", issues)

    def resolve(self, draft: ScenarioDraft) -> Optional[Scenario]:
        """Validated scenario for a draft, repaired if allowed; None when it fails"""
        issues = validate(draft, self.case)
        if not issues:
            return draft.scenario
        if not self.use_feedback:
            self._fail(draft, issues, "invalid and feedback is disabled")
            return None
        try:
            return self.repair(draft, issues)
        except RepairFailedError as exc:
            self._fail(draft, exc.errors, str(exc))
            return None

    def _fail(self, draft: ScenarioDraft, issues: Sequence[ValidationIssue], reason: str) -> None:
        print(f"[Agent] Dropping {draft.scenario_id or 'draft'}: {reason}")
        self.transcript.failures.append({
            'scenario_id': draft.scenario_id or f"s{draft.sub_index:02d}",
            'reason': reason,
            'errors': [str(i) for i in issues],
        })

    # ------------------------------------------------------------------ #
    # Local expansion
    # ------------------------------------------------------------------ #

    def expand(self, sub: SubRequest, template: ScenarioDraft,
               size_hint: Optional[int] = None) -> List[ScenarioDraft]:
        """One draft per sweep point or per sampled dataset scenario"""
        base = template.scenario
        if sub.intent == 'fault_scenario':
            locations = [loc for loc in (sub.constraints.get('locations') or []) if loc != base.location]
            scenarios = [base] + [replace(base, location=int(loc), id=f"{base.id}-{k:04d}")
                                  for k, loc in enumerate(locations, 1)]
        elif sub.intent == 'sweep':
            scenarios = self._sweep(sub, base)
        else:
            scenarios = self._sample(sub, base, size_hint, template.sub_index)
        drafts = []
        for scenario in scenarios:
            if scenario is base:
                drafts.append(template)
                continue
            response = format_block('scenario', scenario.to_dict())
            drafts.append(ScenarioDraft(scenario, response, template.rationale,
                                        sub_index=template.sub_index, expanded=True))
        return drafts

    def _sweep(self, sub: SubRequest, base: Scenario) -> List[Scenario]:
        c = sub.constraints
        lo, hi = c.get('clearing_ms') if isinstance(c.get('clearing_ms'), list) else DEFAULT_CLEARING_RANGE_MS
        step = float(c.get('clearing_step_ms', DEFAULT_SWEEP_STEP_MS))
        grid = np.arange(float(lo), float(hi) + step / 2.0, step)
        locations = c.get('locations') or [base.location]
        scenarios = []
        for loc in locations:
            for ms in grid:
                scenarios.append(replace(
                    base, location=int(loc), t_clear=round(base.t_fault + float(ms) / 1000.0, 6),
                    label_hint=None, id=f"{base.id}-{len(scenarios):04d}"))
        return scenarios

    def _sample(self, sub: SubRequest, base: Scenario, size_hint: Optional[int],
                index: int) -> List[Scenario]:
        """Seeded random scenarios around the template"""
        c = sub.constraints
        count = int(c.get('count') or size_hint or 1)
        rng = np.random.default_rng([self.seed, index])
        kinds = c.get('fault_kind') or [base.fault_kind]
        kinds = kinds if isinstance(kinds, list) else [kinds]
        lo_ms, hi_ms = c.get('clearing_ms') if isinstance(c.get('clearing_ms'), list) else DEFAULT_CLEARING_RANGE_MS
        lo_load, hi_load = c.get('load_range') or DEFAULT_LOAD_RANGE
        pinned = c.get('locations')

        scenarios = []
        for k in range(count):
            kind = kinds[int(rng.integers(len(kinds)))]
            candidates = pinned or self._locations(kind)
            location = int(candidates[int(rng.integers(len(candidates)))])
            ms = float(rng.uniform(lo_ms, hi_ms))
            load = float(rng.uniform(lo_load, hi_load))
            keep_action = kind == base.fault_kind and location == base.location
            scenarios.append(Scenario(
                fault_kind=kind,
                location=location,
                t_fault=base.t_fault,
                t_clear=round(base.t_fault + ms / 1000.0, 6),
                r_f=base.r_f if kind in BUS_FAULT_KINDS else 0.0,
                x_f=base.x_f if kind in BUS_FAULT_KINDS else 0.0,
                clearing_action=base.clearing_action if keep_action else
                ('trip_line' if kind == 'line_trip' else 'remove_fault'),
                trip_line=base.trip_line if keep_action else None,
                load_scale=round(load, 4),
                id=f"{base.id}-{k:04d}",
            ))
        return scenarios

    def _locations(self, kind: str) -> List[int]:
        if kind == 'line_trip':
            return [line.id for line in self.case.lines if line.in_service]
        if kind == 'gen_trip':
            return [gen.id for gen in self.case.generators]
        return [bus.id for bus in self.case.buses]


# --------------------------------------------------------------------------- #
# Campaign
# --------------------------------------------------------------------------- #

def _simulate_one(args) -> Tuple[str, Optional[Trajectory], str]:
    case, scenario, sim_cfg = args
    try:
        return scenario.id, simulate(case, scenario, sim_cfg, verbose=False), ''
    except _INTEGRATION_ERRORS as exc:
        return scenario.id, None, str(exc)


def simulate_all(case: GridCase, scenarios: Sequence[Scenario], sim_cfg: Optional[SimulationConfig] = None,
                 workers: int = 1, quiet: bool = False) -> List[Tuple[str, Optional[Trajectory], str]]:
    """Simulate scenarios in input order; ``workers`` > 1 uses a process pool"""
    jobs = [(case, scenario, sim_cfg) for scenario in scenarios]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(tqdm(pool.map(_simulate_one, jobs, chunksize=4), total=len(jobs),
                                desc="Simulating", disable=quiet))
    else:
        results = [_simulate_one(job) for job in tqdm(jobs, desc="Simulating", disable=quiet)]
    return results


def run_campaign(request: str, case: GridCase, cfg: CampaignSettings, backend, store=None,
                 thresholds: Optional[StabilityThresholds] = None, feature_scheme: str = 'statistical',
                 sim_cfg: Optional[SimulationConfig] = None, params: Optional[ChatParams] = None,
                 quiet: bool = False) -> Tuple[Dataset, AgentTranscript, List[Trajectory], List[StabilityLabel]]:
    """
    Request -> labeled, balanced dataset

    Returns:
        (dataset, transcript, trajectories, labels); trajectories and labels
        cover every integrated scenario, before balancing

    Raises:
        CampaignError: no scenario survives, or the outcomes cannot be
            balanced (the transcript is attached)
    """
    thresholds = thresholds or StabilityThresholds()
    transcript = AgentTranscript(request=request)
    agent = ScenarioAgent(backend, case, store=store, params=params, max_retries=cfg.max_retries,
                          use_rag=cfg.use_rag, use_cot=cfg.use_cot, use_feedback=cfg.use_feedback,
                          rag_k=cfg.rag_k, seed=cfg.seed, transcript=transcript)

    print(f"\n{'=' * 80}")
    print(f"Campaign on {case.name}: {request}")
    print(f"{'=' * 80}\n")

    subrequests = agent.decompose(request)
    scenarios: List[Scenario] = []
    for index, sub in enumerate(subrequests):
        remaining = max(1, cfg.size - len(scenarios))
        drafts = agent.draft(sub, index, size_hint=remaining)
        if len(drafts) == 1 and drafts[0].issues:
            # invalid template: repair it before expanding
            fixed = agent.resolve(drafts[0])
            if fixed is None:
                transcript.drafted += 1
                continue
            template = ScenarioDraft(fixed, transcript.attempts[-1].response, drafts[0].rationale,
                                     sub_index=index)
            drafts = agent.expand(sub, template, size_hint=remaining)
        for draft in drafts:
            transcript.drafted += 1
            scenario = agent.resolve(draft)
            if scenario is not None:
                scenarios.append(scenario)
        print(f"[Agent] Sub-request {index} ({sub.intent}): {len(scenarios)} valid scenario(s) so far")

    if not scenarios:
        raise CampaignError("no valid scenario survived validation and repair", transcript)

    results = simulate_all(case, scenarios, sim_cfg, workers=cfg.workers, quiet=quiet)
    by_id = {s.id: s for s in scenarios}
    samples, trajectories, labels = [], [], []
    for scenario_id, traj, error in results:
        if traj is None:
            transcript.failures.append({'scenario_id': scenario_id, 'reason': f"integration failed: {error}",
                                        'errors': []})
            print(f"[WARNING] {scenario_id} could not be integrated: {error}")
            continue
        label = classify(traj, thresholds)
        code = label.binary_code if cfg.task == 'binary' else label.multiclass
        samples.append(LabeledSample(extract_features(traj, feature_scheme), code, scenario_id))
        trajectories.append(traj)
        labels.append(label)
        transcript.scenarios.append(by_id[scenario_id])
        transcript.labels[scenario_id] = label.binary
        name = label.binary if cfg.task == 'binary' else CLASS_NAMES[label.multiclass]
        transcript.class_counts[name] = transcript.class_counts.get(name, 0) + 1
    transcript.integrated = len(samples)

    if not samples:
        raise CampaignError("no scenario could be integrated", transcript)

    n_classes = 2 if cfg.task == 'binary' else len(CLASS_NAMES)
    metadata = {
        'case': case.name,
        'request': request,
        'task': cfg.task,
        'class_names': ['stable', 'unstable'] if cfg.task == 'binary'
        else [CLASS_NAMES[i] for i in range(n_classes)],
        'scenario_schema_version': SCENARIO_SCHEMA_VERSION,
        'thresholds': thresholds.to_dict(),
        'transcript_digest': transcript.digest,
        'validity_rate': transcript.validity_rate,
    }
    try:
        dataset = assemble(samples, cfg.balance_target, cfg.seed, n_classes=n_classes,
                           tolerance=cfg.balance_tolerance, metadata=metadata)
    except DatasetError as exc:
        raise CampaignError(f"cannot build a balanced dataset: {exc} "
                            f"(outcomes: {transcript.class_counts})", transcript)

    print(f"[Agent] Validity {transcript.validity_rate:.1%} ({transcript.integrated}/{transcript.drafted}); "
          f"dataset {len(dataset)} samples, classes {dataset.class_counts()}")
    return dataset, transcript, trajectories, labels
