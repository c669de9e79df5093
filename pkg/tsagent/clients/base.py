"""Chat exchange model and the backend interface shared by all clients"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Protocol, Sequence

import numpy as np

ROLES = ('system', 'user', 'assistant')


@dataclass(frozen=True)
class ChatParams:
    temperature: float = 0.5
    max_tokens: int = 2048
    top_p: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must lie in (0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        return {'temperature': self.temperature, 'max_tokens': self.max_tokens, 'top_p': self.top_p}


@dataclass(frozen=True)
class ChatExchange:
    """
    Messages sent in one chat call.

    ``template`` and ``slots`` record how the messages were rendered; they
    are never sent over the wire and do not enter the digest.
    """
    messages: tuple
    params: ChatParams = field(default_factory=ChatParams)
    template: str = ''
    slots: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        messages = tuple({'role': m['role'], 'content': m['content']} for m in self.messages)
        if not messages:
            raise ValueError("a chat exchange needs at least one message")
        if messages[0]['role'] != 'system':
            raise ValueError("the first message must have role 'system'")
        for message in messages:
            if message['role'] not in ROLES:
                raise ValueError(f"unknown role {message['role']!r}")
            if not isinstance(message['content'], str):
                raise ValueError("message content must be text")
        object.__setattr__(self, 'messages', messages)

    @property
    def digest(self) -> str:
        return message_digest(self.messages)

    @property
    def last_user(self) -> str:
        for message in reversed(self.messages):
            if message['role'] == 'user':
                return message['content']
        return ''

    def extended(self, *extra: Dict[str, str]) -> 'ChatExchange':
        """Same exchange with more messages appended"""
        return ChatExchange(self.messages + tuple(extra), self.params, self.template, dict(self.slots))


def message_digest(messages: Sequence[Dict[str, str]]) -> str:
    """First 16 hex chars of SHA-256 over the canonical JSON message list"""
    canonical = json.dumps([{'role': m['role'], 'content': m['content']} for m in messages],
                           sort_keys=True, separators=(',', ':'), ensure_ascii=False)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


class LLMBackend(Protocol):
    """Anything that can answer chats and embed text"""

    def chat(self, exchange: ChatExchange) -> str:
        ...

    def embed(self, texts: List[str]) -> np.ndarray:
        ...
