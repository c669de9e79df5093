"""
Deterministic stand-in for an LLM

``OfflinePolicy`` answers every agent template from the structured slots the
prompt was rendered with, so complete campaigns and searches run without a
network. It is used as the fallback of ``MockLLMClient``.
"""

import json
import re
from typing import Any, Dict, List, Optional

from ..errors import LLMError
from ..models.architecture import COMMON_FIELDS, FAMILY_FIELDS, SearchSpace
from .base import ChatExchange

DEFAULT_CLEARING_MS = 100.0
DEFAULT_SWEEP_MS = (50.0, 500.0)

_KIND_PATTERNS = (
    ('three_phase', re.compile(r'three[- ]?phase|3[- ]?phase|balanced fault', re.I)),
    ('slg', re.compile(r'single[- ]line[- ]to[- ]ground|\bslg\b|single[- ]phase|line[- ]to[- ]ground', re.I)),
    ('line_trip', re.compile(r'line (?:trip|outage)|trip(?:ping)? (?:of )?line|line \d+ (?:trip|outage)', re.I)),
    ('gen_trip', re.compile(r'generator (?:trip|outage)|gen(?:erator)? loss|loss of generator|trip(?:ping)? (?:of )?generator', re.I)),
)
_NUM_LIST = r'(\d+(?:\s*(?:,|and|&)\s*\d+(?![\d.]|\s*(?:ms|s\b|%|hz)))*)'
_BUSES = re.compile(r'\bbus(?:es)?\s*#?\s*' + _NUM_LIST, re.I)
_LINES = re.compile(r'\blines?\s*#?\s*' + _NUM_LIST, re.I)
_GENS = re.compile(r'\bgenerators?\s*#?\s*' + _NUM_LIST, re.I)
_MS_RANGE = re.compile(r'(\d+(?:\.\d+)?)\s*(?:ms)?\s*(?:-|–|—|to)\s*(\d+(?:\.\d+)?)\s*ms', re.I)
_MS_SINGLE = re.compile(r'(\d+(?:\.\d+)?)\s*ms\b', re.I)
_MS_STEP = re.compile(r'(?:steps? of|every|step)\s*(\d+(?:\.\d+)?)\s*ms|(\d+(?:\.\d+)?)\s*ms steps?', re.I)
_COUNT = re.compile(r'(\d+)\s*(?:scenarios|samples|cases|simulations|runs)', re.I)
_LOAD_RANGE = re.compile(r'load(?:ing|s)?[^\d%]{0,20}(\d+(?:\.\d+)?)\s*%?\s*(?:-|–|to|and)\s*(\d+(?:\.\d+)?)\s*%', re.I)
_T_FAULT = re.compile(r'(?:at|inception(?: time)?(?: of)?)\s*(?:t\s*=\s*)?(\d+(?:\.\d+)?)\s*s\b', re.I)
_IMPEDANCE = re.compile(r'\b([rx])_?f\s*(?:=|of)\s*(\d+(?:\.\d+)?)', re.I)
_RATIO = re.compile(r'(\d+(?:\.\d+)?)\s*%\s*stable', re.I)
_ISSUE = re.compile(r'^\s*-?\s*\[(\w+)\]\s*([\w.]+):', re.M)
_DIGEST = re.compile(r'\b[0-9a-f]{16}\b')
_FENCE = re.compile(r'```[ \t]*(\w+)[ \t]+v(\d+)[ \t]*\n(.*?)```', re.S)


def _numbers(text: str) -> List[int]:
    return [int(n) for n in re.findall(r'\d+', text)]


def _block(tag: str, payload: Any) -> str:
    return f"```{tag} v1\n{json.dumps(payload, indent=2, sort_keys=True)}\n```"


def _first_block(text: str, tag: str) -> Optional[Dict[str, Any]]:
    for match in _FENCE.finditer(text or ''):
        if match.group(1) == tag:
            try:
                value = json.loads(match.group(3))
            except json.JSONDecodeError:
                return None
            return value if isinstance(value, dict) else None
    return None


def _nearest(target: Any, candidates: List[int]) -> Optional[int]:
    if not candidates:
        return None
    try:
        target = float(target)
    except (TypeError, ValueError):
        return candidates[0]
    return min(candidates, key=lambda c: (abs(c - target), c))


class OfflinePolicy:
    """
    Template-aware deterministic responder

    Args:
        n_candidates: Upper bound on architecture blocks per generator reply
    """

    def __init__(self, n_candidates: int = 4):
        self.n_candidates = n_candidates

    def __call__(self, exchange: ChatExchange) -> str:
        handler = getattr(self, f"_answer_{exchange.template}", None)
        if handler is None:
            raise LLMError(f"offline policy has no answer for template '{exchange.template}'")
        return handler(exchange.slots)

    # ------------------------------------------------------------------ #
    # Scenario agent
    # ------------------------------------------------------------------ #

    def _answer_conversion(self, slots: Dict[str, Any]) -> str:
        request = str(slots.get('request', ''))
        sentences = [s for s in re.split(r'(?<=[.;!?])\s+|\n+|\bthen\b', request) if s.strip()]
        subrequests = []
        for sentence in sentences:
            sub = self._parse_sentence(sentence)
            if sub is not None:
                subrequests.append(sub)
        prose = f"I found {len(subrequests)} independent sub-request(s)."
        return f"{prose}\n\n{_block('subrequests', {'subrequests': subrequests})}"

    def _parse_sentence(self, sentence: str) -> Optional[Dict[str, Any]]:
        constraints: Dict[str, Any] = {}
        kinds = [kind for kind, pattern in _KIND_PATTERNS if pattern.search(sentence)]
        if kinds:
            constraints['fault_kind'] = kinds if len(kinds) > 1 else kinds[0]

        kind = kinds[0] if kinds else 'three_phase'
        location_pattern = {'line_trip': _LINES, 'gen_trip': _GENS}.get(kind, _BUSES)
        locations = []
        for match in location_pattern.finditer(sentence):
            locations.extend(_numbers(match.group(1)))
        if locations:
            constraints['locations'] = sorted(set(locations), key=locations.index)
        if kind in ('three_phase', 'slg'):
            lines = [n for m in _LINES.finditer(sentence) for n in _numbers(m.group(1))]
            if lines and re.search(r'\btrip', sentence, re.I):
                constraints['clearing_action'] = 'trip_line'
                constraints['trip_line'] = lines[0]

        ms_range = _MS_RANGE.search(sentence)
        if ms_range:
            lo, hi = sorted(float(v) for v in ms_range.groups())
            constraints['clearing_ms'] = [lo, hi]
        else:
            single = _MS_SINGLE.search(sentence)
            if single:
                constraints['clearing_ms'] = float(single.group(1))
        step = _MS_STEP.search(sentence)
        if step:
            constraints['clearing_step_ms'] = float(step.group(1) or step.group(2))
        t_fault = _T_FAULT.search(sentence)
        if t_fault:
            constraints['t_fault'] = float(t_fault.group(1))
        for symbol, value in _IMPEDANCE.findall(sentence):
            constraints[f"{symbol.lower()}_f"] = float(value)
        load = _LOAD_RANGE.search(sentence)
        if load:
            lo, hi = sorted(float(v) / 100.0 for v in load.groups())
            constraints['load_range'] = [lo, hi]
        count = _COUNT.search(sentence)
        if count:
            constraints['count'] = int(count.group(1))
        ratio = _RATIO.search(sentence)
        if ratio:
            constraints['balance_target'] = float(ratio.group(1)) / 100.0
        elif re.search(r'\bbalanced\b', sentence, re.I):
            constraints['balance_target'] = 0.5

        if 'count' in constraints or re.search(r'\bdataset\b', sentence, re.I):
            intent = 'dataset_goal'
        elif re.search(r'\bsweep', sentence, re.I) or isinstance(constraints.get('clearing_ms'), list):
            intent = 'sweep'
            if not isinstance(constraints.get('clearing_ms'), list):
                constraints['clearing_ms'] = list(DEFAULT_SWEEP_MS)
        elif kinds:
            intent = 'fault_scenario'
        else:
            return None
        return {'intent': intent, 'constraints': constraints}

    def _answer_architecture(self, slots: Dict[str, Any]) -> str:
        sub = json.loads(slots['subrequest']) if isinstance(slots.get('subrequest'), str) else slots['subrequest']
        case = json.loads(slots['case_summary']) if isinstance(slots.get('case_summary'), str) else {}
        c = dict(sub.get('constraints') or {})

        kind = c.get('fault_kind', 'three_phase')
        if isinstance(kind, list):
            kind = kind[0] if kind else 'three_phase'
        locations = c.get('locations') or ([c['location']] if 'location' in c else [])
        location = locations[0] if locations else self._default_location(kind, case)
        t_fault = float(c.get('t_fault', 1.0))
        clearing = c.get('clearing_ms', DEFAULT_CLEARING_MS)
        if isinstance(clearing, list):
            clearing = clearing[0]
        clearing = float(clearing)
        load_range = c.get('load_range')
        load_scale = float(c.get('load_scale', sum(load_range) / 2.0 if load_range else 1.0))

        scenario = {
            'fault_kind': kind,
            'location': location,
            't_fault': t_fault,
            't_clear': round(t_fault + clearing / 1000.0, 6),
            'load_scale': round(load_scale, 6),
            'label_hint': 'unstable' if clearing > 250.0 else 'stable',
        }
        if kind in ('three_phase', 'slg'):
            scenario['r_f'] = float(c.get('r_f', 0.01))
            scenario['x_f'] = float(c.get('x_f', 0.001))
            scenario['clearing_action'] = c.get('clearing_action', 'remove_fault')
            if c.get('trip_line') is not None:
                scenario['trip_line'] = c['trip_line']
                scenario['clearing_action'] = 'trip_line'
        scenario['rationale'] = (f"{kind.replace('_', ' ')} at element {location}, inception "
                                 f"{t_fault:g} s, cleared after {clearing:g} ms")
        return f"Scenario for the sub-request:\n\n{_block('scenario', scenario)}"

    @staticmethod
    def _default_location(kind: str, case: Dict[str, Any]) -> int:
        if kind == 'line_trip':
            lines = [l['id'] for l in case.get('lines', []) if l.get('in_service', True)]
            return lines[0] if lines else 1
        if kind == 'gen_trip':
            gens = [g['id'] for g in case.get('generators', [])]
            return gens[-1] if gens else 1
        buses = case.get('buses', [])
        loads = [b['id'] for b in buses if b.get('kind') == 'pq']
        return loads[0] if loads else (buses[0]['id'] if buses else 1)

    def _answer_feedback(self, slots: Dict[str, Any]) -> str:
        case = json.loads(slots['case_summary']) if isinstance(slots.get('case_summary'), str) else {}
        errors = str(slots.get('errors', ''))
        previous = _first_block(str(slots.get('previous_response', '')), 'scenario')
        issues = _ISSUE.findall(errors)
        codes = {code for code, _ in issues}

        if previous is None or 'schema' in codes:
            base = previous if isinstance(previous, dict) else {}
            kind = base.get('fault_kind', 'three_phase')
            fixed = {
                'fault_kind': kind if kind in ('three_phase', 'slg', 'line_trip', 'gen_trip') else 'three_phase',
                'location': base.get('location', self._default_location('three_phase', case)),
                't_fault': 1.0,
                't_clear': 1.1,
            }
            for key in ('r_f', 'x_f', 'load_scale', 'clearing_action', 'trip_line', 'label_hint'):
                if key in base:
                    fixed[key] = base[key]
        else:
            fixed = dict(previous)
        fixed.pop('rationale', None)

        buses = [b['id'] for b in case.get('buses', [])]
        lines = [l['id'] for l in case.get('lines', []) if l.get('in_service', True)]
        gens = [g['id'] for g in case.get('generators', [])]
        for code, fieldname in issues:
            if code == 'unknown_bus':
                fixed['location'] = _nearest(fixed.get('location'), buses)
            elif code in ('unknown_line', 'line_out_of_service'):
                key = 'trip_line' if fieldname == 'trip_line' else 'location'
                fixed[key] = _nearest(fixed.get(key), lines)
            elif code == 'unknown_generator':
                fixed['location'] = _nearest(fixed.get('location'), gens)
            elif code in ('missing_trip_line', 'line_not_adjacent'):
                adjacent = [l['id'] for l in case.get('lines', [])
                            if l.get('in_service', True) and fixed.get('location') in (l['from'], l['to'])]
                if adjacent:
                    fixed['trip_line'] = adjacent[0]
                else:
                    fixed['clearing_action'] = 'remove_fault'
                    fixed.pop('trip_line', None)
            elif code == 'islanding':
                if fixed.get('clearing_action') == 'trip_line':
                    fixed['clearing_action'] = 'remove_fault'
                    fixed.pop('trip_line', None)
                elif fixed.get('fault_kind') == 'line_trip':
                    later = [l for l in lines if l > fixed.get('location', 0)]
                    fixed['location'] = later[0] if later else lines[0]
                elif fixed.get('fault_kind') == 'gen_trip':
                    later = [g for g in gens if g > fixed.get('location', 0)]
                    fixed['location'] = later[0] if later else gens[0]
            elif code == 'ordering':
                t_fault = float(fixed.get('t_fault', 1.0))
                if t_fault < 0:
                    t_fault = 1.0
                fixed['t_fault'] = t_fault
                if float(fixed.get('t_clear', 0.0)) <= t_fault:
                    fixed['t_clear'] = round(t_fault + DEFAULT_CLEARING_MS / 1000.0, 6)
                if fixed.get('horizon') is not None and float(fixed['horizon']) <= float(fixed['t_clear']):
                    fixed.pop('horizon')
            elif code == 'range':
                if fieldname == 'horizon':
                    fixed.pop('horizon', None)
                elif fieldname == 'load_scale':
                    fixed['load_scale'] = min(max(float(fixed.get('load_scale', 1.0)), 0.1), 2.0)
                elif fieldname == 'label_hint':
                    fixed.pop('label_hint', None)
            elif code == 'impedance':
                for key in ('r_f', 'x_f'):
                    if key in fixed:
                        fixed[key] = abs(float(fixed[key]))
        fixed['rationale'] = f"corrected {', '.join(sorted(codes)) or 'format'} after checking the case numbering"
        return f"Corrected scenario:\n\n{_block('scenario', fixed)}"

    # ------------------------------------------------------------------ #
    # Architecture search
    # ------------------------------------------------------------------ #

    def _answer_strategist(self, slots: Dict[str, Any]) -> str:
        space = SearchSpace.from_dict(json.loads(slots['search_space']))
        seen = set(_DIGEST.findall(str(slots.get('history', ''))))
        pending = [d for d in space.descriptors() if d.digest not in seen]
        if not pending:
            strategy = {'direction': "The search space is exhausted; re-check the best architecture so far.",
                        'menus': {}}
            return _block('strategy', strategy)
        nxt = pending[0]
        # Pin every field to the next unvisited design except the one with the
        # most unvisited alternatives, so the narrowed space holds only new designs
        names = FAMILY_FIELDS[nxt.family] + COMMON_FIELDS
        varied, values = names[0], [getattr(nxt, names[0])]
        for name in names:
            options = []
            for desc in pending:
                if desc.family != nxt.family:
                    continue
                if all(getattr(desc, other) == getattr(nxt, other) for other in names if other != name):
                    if getattr(desc, name) not in options:
                        options.append(getattr(desc, name))
            if len(options) > len(values):
                varied, values = name, options
        menus: Dict[str, Any] = {'families': [nxt.family]}
        for name in names:
            chosen = values if name == varied else [getattr(nxt, name)]
            menus[name] = json.loads(json.dumps(chosen))
        if nxt.family == 'mlp':
            focus = f"mlp with hidden layers {list(nxt.hidden) or 'none'}"
        else:
            focus = f"multi-branch network {'with' if nxt.attention else 'without'} attention"
        opening = "Start from a baseline" if not seen else "Continue with"
        direction = f"{opening}: {focus}, varying {varied}."
        feedback = str(slots.get('feedback', '')).strip()
        recommendation = re.search(r'^\s*1\.\s*(.+)$', feedback, re.M)
        if recommendation:
            direction += f" Previous feedback: {recommendation.group(1).strip()}"
        return f"Strategy:\n\n{_block('strategy', {'direction': direction, 'menus': menus})}"

    def _answer_generator(self, slots: Dict[str, Any]) -> str:
        space = SearchSpace.from_dict(json.loads(slots['search_space']))
        limit = int(slots.get('n_candidates', self.n_candidates))
        blocks = []
        for desc in space.descriptors():
            if len(blocks) == limit:
                break
            payload = desc.to_dict()
            payload.pop('seed')
            payload.pop('branch_slices')
            blocks.append(_block('architecture', payload))
        return "Candidates:\n\n" + "\n\n".join(blocks)

