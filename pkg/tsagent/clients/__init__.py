"""LLM backends: remote OpenAI-compatible client, scripted mock, offline policy"""

from .base import ChatExchange, ChatParams, LLMBackend, message_digest
from .embeddings import EMBED_DIM, HashingEmbedder
from .mock import MockLLMClient, dump_script, load_script
from .offline import OfflinePolicy
from .remote import API_KEY_ENV, RemoteLLMClient


def make_backend(run_config, offline: bool = False):
    """
    Backend described by a RunConfig

    ``offline`` forces the mock backend. A mock without a script (or with
    gaps in it) answers through ``OfflinePolicy``.

    Raises:
        ConfigError: remote backend without an API key
    """
    backend = run_config.backend
    if offline or backend.get('kind') == 'mock':
        script = load_script(backend['script']) if backend.get('kind') == 'mock' and backend.get('script') else {}
        return MockLLMClient(script, fallback=OfflinePolicy(run_config.n_candidates))
    llm = run_config.llm
    return RemoteLLMClient(
        base_url=backend['base_url'],
        model=backend['model'],
        embed_model=backend.get('embed_model', 'text-embedding-ada-002'),
        timeout=llm.timeout,
        max_retries=llm.max_retries,
        requests_per_minute=llm.requests_per_minute,
    )


__all__ = [
    'ChatExchange', 'ChatParams', 'LLMBackend', 'message_digest',
    'EMBED_DIM', 'HashingEmbedder',
    'MockLLMClient', 'dump_script', 'load_script',
    'OfflinePolicy',
    'API_KEY_ENV', 'RemoteLLMClient',
    'make_backend',
]
