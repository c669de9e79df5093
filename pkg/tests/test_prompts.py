"""Tests for template rendering and fenced-block parsing."""

import pytest

from tsagent.errors import BlockParseError, PromptError
from tsagent.prompts import (
    COT_CLAUSE,
    TEMPLATES,
    extract_blocks,
    format_block,
    parse_block,
    reformat_message,
    render,
    render_text,
    rewrite_prompt,
)

ROLE = {'persona': 'a tester', 'system_description': 'Tiny grid.'}


def test_every_template_slot_is_listed():
    assert TEMPLATES['conversion'].slots == ['request', 'case_summary']
    assert TEMPLATES['role'].slots == ['persona', 'system_description']


def test_unbound_slot_is_named():
    with pytest.raises(PromptError, match="unbound slot 'case_summary'"):
        render_text('conversion', {'request': 'x'})


def test_unknown_template():
    with pytest.raises(PromptError, match='unknown template'):
        render('haiku', {})


def test_render_builds_system_and_user():
    exchange = render('conversion', {**ROLE, 'request': 'Fault bus 7', 'case_summary': '9 buses'})
    system, user = exchange.messages
    assert system['role'] == 'system'
    assert system['content'].startswith('You are a tester.')
    assert 'Fault bus 7' in user['content']
    assert COT_CLAUSE in user['content']
    assert user['content'].endswith('containing JSON.')
    assert '```subrequests v1' in user['content']
    assert exchange.template == 'conversion'
    assert exchange.slots['request'] == 'Fault bus 7'


def test_render_without_cot_or_rewrite():
    exchange = render('conversion', {**ROLE, 'request': 'r', 'case_summary': 'c'}, use_cot=False, rewrite=False)
    user = exchange.messages[1]['content']
    assert COT_CLAUSE not in user
    assert 'Output format' not in user


def test_structured_bindings_are_json():
    exchange = render('conversion', {**ROLE, 'request': 'r', 'case_summary': {'buses': [1, 2]}})
    assert '{"buses": [1, 2]}' in exchange.messages[1]['content']


def test_template_without_preambles_is_single_system_message():
    exchange = render('perf_feedback', {'candidate': 'abc', 'analysis': 'ok', 'recommendations': '- none'})
    assert len(exchange.messages) == 1
    assert exchange.messages[0]['role'] == 'system'


def test_rewrite_normalizes_numbered_steps():
    text = rewrite_prompt("Steps:\n1) first   thing\n2) second\n\n\n\nend", TEMPLATES['feedback'])
    assert '1. first thing' in text
    assert '2. second' in text
    assert '\n\n\n' not in text
    assert text.endswith("```scenario v1 and containing JSON.")


def test_context_is_delimited():
    class Chunk:
        source_id, kind, text = 'guide', 'user_guide', 'Use bus ids.'

    exchange = render('conversion', {**ROLE, 'request': 'r', 'case_summary': 'c'}, context=[Chunk()])
    user = exchange.messages[1]['content']
    assert '### Retrieved context' in user
    assert '[guide | user_guide]' in user


class TestBlocks:
    def test_parse_single_block(self):
        reply = "Sure.\n" + format_block('scenario', {'location': 7}) + "\nDone."
        assert parse_block(reply, 'scenario') == {'location': 7}

    def test_no_block(self):
        with pytest.raises(BlockParseError, match='no ```scenario v1``` block'):
            parse_block('I think bus 7.', 'scenario')

    def test_two_blocks(self):
        reply = format_block('scenario', {}) + format_block('scenario', {})
        with pytest.raises(BlockParseError, match='found 2'):
            parse_block(reply, 'scenario')

    def test_other_tags_ignored(self):
        reply = format_block('strategy', {'a': 1}) + format_block('scenario', {'b': 2})
        assert parse_block(reply, 'scenario') == {'b': 2}

    def test_wrong_version(self):
        with pytest.raises(BlockParseError, match='version 2'):
            parse_block("```scenario v2\n{}\n```", 'scenario')

    def test_invalid_json_reported_next_to_good_blocks(self):
        reply = format_block('architecture', {'k': 1}) + "\n```architecture v1\n{oops}\n```"
        payloads, problems = extract_blocks(reply, 'architecture')
        assert payloads == [{'k': 1}]
        assert len(problems) == 1 and 'not valid JSON' in problems[0]

    def test_reformat_message(self):
        assert "exactly one fenced block tagged 'scenario v1'" in reformat_message('scenario')
        assert 'one or more' in reformat_message('architecture', multi=True)
