"""
Prompt templates, rendering, and structured-block parsing

Templates use ``$slot`` placeholders. Agents exchange data with the LLM only
through fenced blocks whose info string is ``<tag> v1`` and whose body is JSON.
"""

import json
import re
from dataclasses import dataclass
from string import Template
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .clients.base import ChatExchange, ChatParams
from .errors import BlockParseError, PromptError

BLOCK_VERSION = 1
BLOCK_TAGS = ('subrequests', 'scenario', 'strategy', 'architecture')

POWER_PERSONA = "an expert in power system transient stability analysis and simulation"
NAS_PERSONA = "an expert in neural network design for power system stability assessment"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    preambles: Tuple[str, ...] = ()
    output_tag: str = ''
    multi_block: bool = False

    @property
    def slots(self) -> List[str]:
        names = []
        for match in Template.pattern.finditer(self.body):
            name = match.group('named') or match.group('braced')
            if name and name not in names:
                names.append(name)
        return names


TEMPLATES: Dict[str, PromptTemplate] = {t.name: t for t in (
    PromptTemplate('role', (
        "You are $persona.\n"
        "$system_description"
    )),
    PromptTemplate('factuality', (
        "Simulation factuality rules:\n"
        "1. Use only bus, line and generator ids that exist in the case summary.\n"
        "2. Never state simulation results; the simulator produces them.\n"
        "3. If a request cannot be met on this case, explain why in the rationale and choose the closest valid setting."
    )),
    PromptTemplate('conversion', (
        "Break down this long request into independent sub-requests.\n\n"
        "Request:\n$request\n\n"
        "Case:\n$case_summary\n\n"
        "Each sub-request has an intent (fault_scenario, sweep or dataset_goal) and a constraints object. "
        "Useful constraint keys: fault_kind, locations, t_fault, clearing_ms (a value, or [min, max] with "
        "clearing_step_ms), r_f, x_f, clearing_action, trip_line, load_range, count, balance_target.\n"
        "Output a JSON object {\"subrequests\": [...]}."
    ), ('role',), 'subrequests'),
    PromptTemplate('architecture', (
        "Set up one transient stability simulation for the sub-request below.\n\n"
        "Sub-request:\n$subrequest\n\n"
        "Case:\n$case_summary\n\n"
        "Scenario fields:\n$schema\n\n"
        "Define the fault location, duration and clearing strategy, and add a short \"rationale\" field."
    ), ('role', 'factuality'), 'scenario'),
    PromptTemplate('feedback', (
        "The scenario you produced failed validation.\n\n"
        "Error message:\n$errors\n\n"
        "Your previous response:\n$previous_response\n\n"
        "Case:\n$case_summary\n\n"
        "Fix it in three steps:\n"
        "1) Read each error and find the field it names.\n"
        "2) Verify the bus, line and generator numbering matches the case.\n"
        "3) Generate the corrected scenario."
    ), ('role', 'factuality'), 'scenario'),
    PromptTemplate('strategist', (
        "Requirements:\n$requirements\n\n"
        "Search space:\n$search_space\n\n"
        "Evaluated architectures so far:\n$history\n\n"
        "Latest performance feedback:\n$feedback\n\n"
        "Formulate or refine the search strategy. Give a direction and, optionally, narrowed menus "
        "(a subset of the search space) for the next candidates."
    ), ('role',), 'strategy'),
    PromptTemplate('generator', (
        "Current strategy:\n$strategy\n\n"
        "Search space:\n$search_space\n\n"
        "Produce up to $n_candidates candidate architectures that follow the strategy. "
        "Descriptor fields:\n$schema"
    ), ('role',), 'architecture', True),
    PromptTemplate('operator', (
        "Some candidate blocks could not be used.\n\n"
        "Problems:\n$errors\n\n"
        "Current strategy:\n$strategy\n\n"
        "Re-emit the candidates as valid architecture blocks."
    ), ('role',), 'architecture', True),
    PromptTemplate('perf_feedback', (
        "Performance feedback for candidate $candidate:\n"
        "Analysis: $analysis\n"
        "Recommendations:\n$recommendations"
    )),
)}

COT_CLAUSE = ("Work step by step: restate the goal, check every id and number against the "
              "information above, then write the output.")


def reformat_message(tag: str, multi: bool = False) -> str:
    """Follow-up sent once when a reply could not be parsed"""
    what = f"one or more fenced blocks tagged '{tag} v{BLOCK_VERSION}'" if multi \
        else f"exactly one fenced block tagged '{tag} v{BLOCK_VERSION}'"
    return f"Your last reply could not be parsed. Reply again with only {what}, each containing valid JSON."


def output_instruction(template: PromptTemplate) -> str:
    if not template.output_tag:
        return ''
    fence = f"```{template.output_tag} v{BLOCK_VERSION}"
    if template.multi_block:
        return f"Output format: one fenced block per candidate, opening with {fence} and containing JSON."
    return f"Output format: exactly one fenced block opening with {fence} and containing JSON."


def rewrite_prompt(text: str, template: PromptTemplate) -> str:
    """
    Syntax rewriting pass

    Collapses runs of blanks, normalizes "1)" list markers to "1.", and
    appends the output-format instruction.
    """
    lines = []
    for line in text.splitlines():
        line = re.sub(r'[ \t]+', ' ', line).rstrip()
        line = re.sub(r'^(\s*)(\d+)\)\s', r'\1\2. ', line)
        lines.append(line)
    out = re.sub(r'\n{3,}', '\n\n', '\n'.join(lines)).strip()
    instruction = output_instruction(template)
    return f"{out}\n\n{instruction}" if instruction else out


def _stringify(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True)


def render_text(name: str, bindings: Dict[str, Any]) -> str:
    """
    Substitute slots in one template body

    Raises:
        PromptError: unknown template or an unbound slot
    """
    template = TEMPLATES.get(name)
    if template is None:
        raise PromptError(f"unknown template '{name}'")
    values = {key: _stringify(value) for key, value in bindings.items()}
    try:
        return Template(template.body).substitute(values)
    except KeyError as exc:
        raise PromptError(f"unbound slot '{exc.args[0]}' in template '{name}'")
    except ValueError as exc:
        raise PromptError(f"malformed placeholder in template '{name}': {exc}")


def format_context(chunks: Sequence) -> str:
    """Retrieved chunks as a delimited section with source and kind"""
    parts = ["### Retrieved context"]
    for item in chunks:
        chunk = getattr(item, 'chunk', item)
        parts.append(f"[{chunk.source_id} | {chunk.kind}]\n{chunk.text.strip()}")
    parts.append("### End of retrieved context")
    return '\n\n'.join(parts)


def render(name: str, bindings: Dict[str, Any], context: Optional[Sequence] = None,
           params: Optional[ChatParams] = None, use_cot: bool = True,
           rewrite: bool = True) -> ChatExchange:
    """
    Build a chat exchange from a template

    The system message is the template's preambles; the user message is the
    body, an optional step-by-step clause, and retrieved context.

    Raises:
        PromptError: unknown template or an unbound slot (named in the message)
    """
    template = TEMPLATES.get(name)
    if template is None:
        raise PromptError(f"unknown template '{name}'")
    bindings = dict(bindings)

    if not template.preambles:
        body = render_text(name, bindings)
        return ChatExchange(({'role': 'system', 'content': body},), params or ChatParams(),
                            name, bindings)

    system = '\n\n'.join(render_text(pre, bindings) for pre in template.preambles)
    user = render_text(name, bindings)
    if use_cot:
        user = f"{user}\n\n{COT_CLAUSE}"
    if context:
        user = f"{user}\n\n{format_context(context)}"
    if rewrite:
        user = rewrite_prompt(user, template)
    messages = ({'role': 'system', 'content': system}, {'role': 'user', 'content': user})
    return ChatExchange(messages, params or ChatParams(), name, bindings)


# --------------------------------------------------------------------------- #
# Structured blocks
# --------------------------------------------------------------------------- #

_FENCE = re.compile(r'```[ \t]*([A-Za-z_]+)[ \t]+v(\d+)[ \t]*\n(.*?)```', re.DOTALL)


def format_block(tag: str, payload: Any) -> str:
    return f"```{tag} v{BLOCK_VERSION}\n{json.dumps(payload, indent=2, sort_keys=True)}\n```"


def extract_blocks(text: str, tag: str) -> Tuple[List[Any], List[str]]:
    """
    All ``tag`` blocks in a reply

    Returns:
        (decoded payloads, problems found in blocks that could not be decoded)
    """
    payloads, problems = [], []
    for match in _FENCE.finditer(text or ''):
        if match.group(1) != tag:
            continue
        version = int(match.group(2))
        if version != BLOCK_VERSION:
            problems.append(f"{tag} block version {version} is not supported (expected {BLOCK_VERSION})")
            continue
        try:
            payloads.append(json.loads(match.group(3)))
        except json.JSONDecodeError as exc:
            problems.append(f"{tag} block is not valid JSON: {exc.msg} at line {exc.lineno}")
    return payloads, problems


def parse_block(text: str, tag: str) -> Any:
    """
    The single ``tag`` block in a reply

    Raises:
        BlockParseError: no block, an undecodable block, or more than one
    """
    payloads, problems = extract_blocks(text, tag)
    if problems:
        raise BlockParseError('; '.join(problems))
    if not payloads:
        raise BlockParseError(f"no ```{tag} v{BLOCK_VERSION}``` block found")
    if len(payloads) > 1:
        raise BlockParseError(f"expected one {tag} block, found {len(payloads)}")
    return payloads[0]
