"""Scripted offline backend"""

import re
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from ..errors import MockScriptError
from .base import ChatExchange
from .embeddings import HashingEmbedder

_RECORD = re.compile(r'^=== ([0-9a-f]{16})[ \t]*$', re.MULTILINE)

ScriptValue = Union[str, Sequence[str]]


def load_script(path: Union[str, Path]) -> Dict[str, ScriptValue]:
    """
    Read a mock script: records introduced by ``=== <digest>`` lines

    A digest that appears more than once yields its responses in order.
    """
    text = Path(path).read_text(encoding='utf-8')
    script: Dict[str, List[str]] = {}
    matches = list(_RECORD.finditer(text))
    for k, match in enumerate(matches):
        end = matches[k + 1].start() if k + 1 < len(matches) else len(text)
        body = text[match.end():end]
        if body.startswith('\n'):
            body = body[1:]
        if body.endswith('\n'):
            body = body[:-1]
        script.setdefault(match.group(1), []).append(body)
    return {digest: bodies[0] if len(bodies) == 1 else bodies for digest, bodies in script.items()}


def dump_script(records: Sequence, path: Union[str, Path]) -> Path:
    """Write (digest, response) pairs in load_script's format"""
    path = Path(path)
    lines = []
    for digest, response in records:
        lines.append(f"=== {digest}")
        lines.append(response)
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


class MockLLMClient:
    """
    Replays scripted responses keyed by the message digest

    Args:
        script: digest -> response (or a list of responses served in order,
            the last one repeating)
        fallback: policy called for digests missing from the script
        embedder: offline embedder for ``embed``
    """

    def __init__(self, script: Optional[Dict[str, ScriptValue]] = None,
                 fallback: Optional[Callable[[ChatExchange], str]] = None,
                 embedder: Optional[HashingEmbedder] = None):
        self.script = dict(script or {})
        self.fallback = fallback
        self.embedder = embedder or HashingEmbedder()
        self.served: Dict[str, int] = {}
        self.calls: List[str] = []

    def chat(self, exchange: ChatExchange) -> str:
        digest = exchange.digest
        self.calls.append(digest)
        if digest in self.script:
            value = self.script[digest]
            if isinstance(value, str):
                return value
            k = self.served.get(digest, 0)
            self.served[digest] = k + 1
            return value[min(k, len(value) - 1)]
        if self.fallback is not None:
            return self.fallback(exchange)
        raise MockScriptError(digest, exchange.last_user[:80])

    def embed(self, texts: List[str]) -> np.ndarray:
        return self.embedder.embed(texts)
