"""Tests for the scenario agent: decomposition, drafting, repair, expansion and campaigns."""

import json

import pytest

from tsagent.clients import HashingEmbedder, MockLLMClient, OfflinePolicy
from tsagent.config import CampaignSettings
from tsagent.core.scenario_agent import (
    AgentTranscript,
    ScenarioAgent,
    ScenarioDraft,
    SubRequest,
    case_summary,
    run_campaign,
    validate,
)
from tsagent.errors import CampaignError, RepairFailedError
from tsagent.models.scenario import Scenario, ValidationIssue
from tsagent.prompts import format_block


class QueueBackend:
    """Answers chats from a fixed list and remembers every exchange"""

    def __init__(self, responses):
        self.responses = list(responses)
        self.exchanges = []
        self.embedder = HashingEmbedder()

    def chat(self, exchange):
        self.exchanges.append(exchange)
        return self.responses.pop(0)

    def embed(self, texts):
        return self.embedder.embed(texts)


def _scenario_block(**fields):
    payload = {'fault_kind': 'three_phase', 'location': 7, 't_fault': 1.0, 't_clear': 1.1}
    payload.update(fields)
    return format_block('scenario', payload)


def _offline_agent(case, **kwargs):
    return ScenarioAgent(MockLLMClient({}, fallback=OfflinePolicy()), case, **kwargs)


class TestSubRequest:
    def test_from_dict(self):
        sub = SubRequest.from_dict({'intent': 'sweep', 'constraints': {'clearing_ms': [50, 100]}})
        assert sub.intent == 'sweep'
        assert 'clearing_ms=[50, 100]' in sub.describe()

    @pytest.mark.parametrize('raw', [
        {'intent': 'poem'},
        {'intent': 'sweep', 'constraints': {'clearing_ms': [200, 100]}},
        {'intent': 'dataset_goal', 'constraints': {'count': 0}},
        {'intent': 'sweep', 'constraints': {'clearing_step_ms': -5}},
        ['not', 'an', 'object'],
    ])
    def test_invalid(self, raw):
        with pytest.raises(ValueError):
            SubRequest.from_dict(raw)


class TestDecompose:
    def test_offline_request_splits_into_pieces(self, wscc9):
        agent = _offline_agent(wscc9)
        subs = agent.decompose("Simulate a three-phase fault at bus 7 cleared after 120 ms. "
                               "Sweep clearing times 50-300 ms in steps of 10 ms for an SLG fault at bus 5.")
        assert [sub.intent for sub in subs] == ['fault_scenario', 'sweep']
        assert subs[0].constraints['locations'] == [7]
        assert subs[1].constraints['clearing_ms'] == [50.0, 300.0]
        assert agent.transcript.subrequests == subs

    def test_reformat_round_recovers(self, wscc9):
        good = format_block('subrequests', {'subrequests': [{'intent': 'fault_scenario', 'constraints': {}}]})
        backend = QueueBackend(["Bus 7 looks interesting.", good])
        agent = ScenarioAgent(backend, wscc9)
        subs = agent.decompose("fault bus 7")
        assert len(subs) == 1
        first, second = agent.transcript.attempts
        assert first.outcome == 'parse_error'
        assert second.stage == 'reformat'
        roles = [m['role'] for m in backend.exchanges[1].messages]
        assert roles == ['system', 'user', 'assistant', 'user']

    def test_unusable_after_reformat(self, wscc9):
        agent = ScenarioAgent(QueueBackend(["nothing", "still nothing"]), wscc9)
        with pytest.raises(CampaignError) as info:
            agent.decompose("fault bus 7")
        assert info.value.transcript is agent.transcript
        assert len(agent.transcript.attempts) == 2

    def test_empty_request(self, wscc9):
        with pytest.raises(ValueError):
            _offline_agent(wscc9).decompose("   ")


class TestRepair:
    def test_budget_bounds_llm_calls(self, wscc9):
        bad = _scenario_block(location=99)
        backend = QueueBackend([bad] * 4)
        agent = ScenarioAgent(backend, wscc9, max_retries=3)
        draft = agent.draft_template(SubRequest('fault_scenario'))
        assert [issue.code for issue in draft.issues] == ['unknown_bus']
        with pytest.raises(RepairFailedError) as info:
            agent.repair(draft, draft.issues)
        assert len(backend.exchanges) == 4
        assert [issue.code for issue in info.value.errors] == ['unknown_bus']
        assert all(a.outcome == 'invalid' for a in agent.transcript.attempts)
        assert len(agent.transcript.attempts_for('s00')) == 4

    def test_errors_are_fed_back(self, wscc9):
        backend = QueueBackend([_scenario_block(location=99), _scenario_block(location=9)])
        agent = ScenarioAgent(backend, wscc9)
        draft = agent.draft_template(SubRequest('fault_scenario'))
        fixed = agent.repair(draft, draft.issues)
        assert fixed.location == 9
        assert fixed.id == 's00'
        feedback_prompt = backend.exchanges[1].messages[1]['content']
        assert '[unknown_bus] location' in feedback_prompt
        assert '"location": 99' in feedback_prompt

    def test_offline_policy_repairs_unknown_bus(self, wscc9):
        agent = _offline_agent(wscc9)
        draft = ScenarioDraft(Scenario('three_phase', 99, 1.1, id='s00'), _scenario_block(location=99))
        fixed = agent.repair(draft, validate(draft, wscc9))
        assert fixed.location == 9

    def test_offline_policy_drops_bad_label_hint(self, wscc9):
        agent = _offline_agent(wscc9)
        draft = ScenarioDraft(Scenario('three_phase', 7, 1.1, label_hint='likely stable', id='s00'),
                              _scenario_block(label_hint='likely stable'))
        issues = validate(draft, wscc9)
        assert [issue.field for issue in issues] == ['label_hint']
        fixed = agent.repair(draft, issues)
        assert fixed.label_hint is None
        assert fixed.location == 7

    def test_disabled_feedback_drops_invalid_draft(self, wscc9):
        agent = ScenarioAgent(QueueBackend([]), wscc9, use_feedback=False)
        draft = ScenarioDraft(Scenario('three_phase', 99, 1.1, id='s03'), '')
        assert agent.resolve(draft) is None
        assert agent.transcript.failures[0]['scenario_id'] == 's03'

    def test_zero_budget(self, wscc9):
        agent = ScenarioAgent(QueueBackend([]), wscc9, max_retries=0)
        draft = ScenarioDraft(Scenario('three_phase', 99, 1.1), '')
        with pytest.raises(RepairFailedError):
            agent.repair(draft, [ValidationIssue('unknown_bus', 'location', 'no bus 99')])

    def test_schema_issue_for_unparseable_draft(self, wscc9):
        agent = ScenarioAgent(QueueBackend(["prose", "more prose"]), wscc9)
        draft = agent.draft_template(SubRequest('fault_scenario'))
        assert draft.scenario is None
        assert validate(draft, wscc9)[0].code == 'schema'


class TestExpansion:
    def _template(self, agent, **fields):
        return ScenarioDraft(Scenario(**{'fault_kind': 'three_phase', 'location': 5, 't_clear': 1.1,
                                         'label_hint': 'stable', 'id': 's01', **fields}), '', sub_index=1)

    def test_sweep_grid(self, wscc9):
        agent = _offline_agent(wscc9)
        sub = SubRequest('sweep', {'clearing_ms': [50, 100], 'clearing_step_ms': 10, 'locations': [5, 7]})
        drafts = agent.expand(sub, self._template(agent))
        assert len(drafts) == 12
        scenarios = [d.scenario for d in drafts]
        assert len({s.id for s in scenarios}) == 12
        assert [s.clearing_duration for s in scenarios[:6]] == pytest.approx([0.05, 0.06, 0.07, 0.08, 0.09, 0.10])
        assert {s.location for s in scenarios[6:]} == {7}
        assert all(s.label_hint is None for s in scenarios)
        assert all(d.expanded for d in drafts)

    def test_fault_scenario_with_several_locations(self, wscc9):
        agent = _offline_agent(wscc9)
        template = self._template(agent)
        drafts = agent.expand(SubRequest('fault_scenario', {'locations': [5, 7, 9]}), template)
        assert drafts[0] is template
        assert [d.scenario.location for d in drafts] == [5, 7, 9]

    def test_dataset_goal_is_seeded(self, wscc9):
        sub = SubRequest('dataset_goal', {'count': 8, 'fault_kind': ['three_phase', 'line_trip'],
                                          'load_range': [0.9, 1.1]})
        a = _offline_agent(wscc9, seed=3).expand(sub, self._template(None))
        b = _offline_agent(wscc9, seed=3).expand(sub, self._template(None))
        c = _offline_agent(wscc9, seed=4).expand(sub, self._template(None))
        assert [d.scenario for d in a] == [d.scenario for d in b]
        assert [d.scenario for d in a] != [d.scenario for d in c]
        assert len(a) == 8
        for draft in a:
            assert 0.9 <= draft.scenario.load_scale <= 1.1
            assert 0.05 <= draft.scenario.clearing_duration <= 0.5 + 1e-9

    def test_count_falls_back_to_size_hint(self, wscc9):
        drafts = _offline_agent(wscc9).expand(SubRequest('dataset_goal'), self._template(None), size_hint=5)
        assert len(drafts) == 5


class TestTranscript:
    def test_validity_and_hint_agreement(self):
        transcript = AgentTranscript('r', drafted=4, integrated=3)
        transcript.scenarios = [Scenario('three_phase', 1, 1.1, label_hint='stable', id='a'),
                                Scenario('three_phase', 1, 1.5, label_hint='stable', id='b')]
        transcript.labels = {'a': 'stable', 'b': 'unstable'}
        assert transcript.validity_rate == 0.75
        assert transcript.hint_agreement == 0.5
        text = transcript.to_text()
        assert 'SUMMARY: 3/4' in text
        assert 'HINT AGREEMENT: 50.0%' in text

    def test_digest_changes_with_content(self):
        a = AgentTranscript('r')
        b = AgentTranscript('r', drafted=1)
        assert a.digest != b.digest
        assert len(a.digest) == 16

    def test_case_summary_is_json(self, wscc9):
        summary = json.loads(json.dumps(case_summary(wscc9)))
        assert len(summary['buses']) == 9
        assert summary['generators'][0] == {'id': 1, 'bus': 1}


@pytest.mark.slow
def test_offline_sweep_campaign(smib):
    cfg = CampaignSettings(size=20, seed=0, use_rag=False)
    backend = MockLLMClient({}, fallback=OfflinePolicy())
    request = "Sweep clearing times 100-300 ms in steps of 20 ms for a three-phase fault at bus 2."
    dataset, transcript, trajectories, labels = run_campaign(request, smib, cfg, backend, quiet=True)

    assert transcript.drafted == 11
    assert transcript.integrated == 11
    assert transcript.validity_rate == 1.0
    assert len(trajectories) == len(labels) == 11
    outcomes = dict(zip((s.id for s in transcript.scenarios), (label.binary for label in labels)))
    assert outcomes['s00-0000'] == 'stable'
    assert outcomes['s00-0010'] == 'unstable'
    counts = dataset.class_counts()
    assert counts[0] > 0 and counts[1] > 0
    assert abs(counts[0] - counts[1]) <= 1
    assert dataset.metadata['transcript_digest'] == transcript.digest


def test_campaign_with_no_valid_scenario(wscc9):
    cfg = CampaignSettings(size=5, max_retries=1, use_rag=False)
    sub = format_block('subrequests', {'subrequests': [{'intent': 'fault_scenario', 'constraints': {}}]})
    bad = _scenario_block(location=99)
    with pytest.raises(CampaignError) as info:
        run_campaign("fault somewhere", wscc9, cfg, QueueBackend([sub, bad, bad]), quiet=True)
    assert info.value.transcript.drafted == 1
    assert info.value.transcript.failures
