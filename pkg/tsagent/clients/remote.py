"""OpenAI-compatible chat and embedding client with retry logic and rate limiting"""

import os
import time
from typing import Callable, List, Optional

import numpy as np
import requests

from ..errors import ConfigError, LLMAuthError, LLMError, RetriesExhaustedError
from ..utils.rate_limit import RateLimiter
from .base import ChatExchange

API_KEY_ENV = 'TSA_LLM_API_KEY'
RETRY_AFTER_CAP = 60.0


class RemoteLLMClient:
    """
    Client for an OpenAI-compatible endpoint

    Transient failures (timeouts, connection errors, HTTP 429 and 5xx) are
    retried with exponential backoff; ``max_retries=3`` allows 4 attempts.
    Every attempt passes through the shared rate limiter.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        embed_model: str = 'text-embedding-ada-002',
        api_key: Optional[str] = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff_base: float = 1.0,
        requests_per_minute: int = 10,
        rate_limiter: Optional[RateLimiter] = None,
        session: Optional[requests.Session] = None,
        sleep: Optional[Callable[[float], None]] = None,
    ):
        """
        Args:
            base_url: Endpoint root, e.g. https://api.openai.com/v1
            model: Chat model name
            embed_model: Embedding model name
            api_key: Bearer token (default: the TSA_LLM_API_KEY env var)
            timeout: Request timeout in seconds
            max_retries: Retries after the first attempt
            backoff_base: First backoff delay in seconds
            requests_per_minute: Rate limit when no limiter is given
        """
        api_key = api_key or os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"remote backend needs an API key in ${API_KEY_ENV}")
        if max_retries < 0:
            raise ConfigError("max_retries must be non-negative")
        self.base_url = base_url.rstrip('/')
        self.model = model
        self.embed_model = embed_model
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.sleep = sleep or time.sleep
        self.rate_limiter = rate_limiter or RateLimiter(requests_per_minute, 60.0)
        self.session = session or requests.Session()
        self.session.headers.update({
            'Authorization': f'Bearer {api_key}',
            'Content-Type': 'application/json',
            'User-Agent': 'tsagent/1.0',
        })
        self.attempts = 0
        self.last_error: Optional[str] = None

    def chat(self, exchange: ChatExchange) -> str:
        body = {'model': self.model, 'messages': list(exchange.messages), **exchange.params.to_dict()}
        result = self._post('/chat/completions', body)
        try:
            content = result['choices'][0]['message']['content']
        except (KeyError, IndexError, TypeError):
            raise LLMError("chat response has no choices[0].message.content")
        if not isinstance(content, str):
            raise LLMError("chat response content is not text")
        return content

    def embed(self, texts: List[str]) -> np.ndarray:
        if not texts:
            raise LLMError("nothing to embed")
        result = self._post('/embeddings', {'model': self.embed_model, 'input': list(texts)})
        try:
            rows = sorted(result['data'], key=lambda item: item['index'])
            return np.array([row['embedding'] for row in rows], dtype=float)
        except (KeyError, TypeError):
            raise LLMError("embedding response has no data[].embedding")

    def _post(self, path: str, body: dict) -> dict:
        url = self.base_url + path
        return self._request_with_retries(
            lambda: self.session.post(url, json=body, timeout=self.timeout), path)

    def _backoff(self, attempt: int) -> float:
        return self.backoff_base * (2 ** attempt)

    def _request_with_retries(self, send, label: str) -> dict:
        """
        Shared retry/backoff engine

        Args:
            send: Zero-arg callable performing one HTTP attempt
            label: Endpoint path for messages

        Raises:
            LLMAuthError: HTTP 401/403
            LLMError: other non-retryable HTTP errors or a non-JSON body
            RetriesExhaustedError: every attempt failed transiently
        """
        self.last_error = None
        total = self.max_retries + 1
        for attempt in range(total):
            self.rate_limiter.wait('llm')
            self.attempts += 1
            wait_time = self._backoff(attempt)
            try:
                response = send()
                response.raise_for_status()
                try:
                    return response.json()
                except ValueError:
                    raise LLMError(f"{label}: response body is not JSON")

            except requests.exceptions.Timeout:
                self.last_error = f"{label} timed out"
                print(f"[LLM] Timeout on attempt {attempt + 1}/{total}")

            except requests.exceptions.ConnectionError as e:
                self.last_error = f"{label} connection error: {e}"
                print(f"[LLM] Connection error on attempt {attempt + 1}/{total}")

            except requests.exceptions.HTTPError as e:
                status = e.response.status_code if e.response is not None else 0
                if status in (401, 403):
                    raise LLMAuthError(f"{label}: authentication failed (HTTP {status})")
                if status == 429:
                    self.last_error = f"{label} rate limited"
                    # Honor a numeric Retry-After, capped; HTTP-date values fall back
                    retry_after = (getattr(e.response, 'headers', None) or {}).get('Retry-After')
                    if retry_after is not None:
                        try:
                            parsed = float(retry_after)
                            if parsed >= 0:
                                wait_time = min(parsed, RETRY_AFTER_CAP)
                        except (TypeError, ValueError):
                            pass
                    print(f"[LLM] Rate limited (HTTP 429) on attempt {attempt + 1}/{total}")
                elif status >= 500:
                    self.last_error = f"{label} server error (HTTP {status})"
                    print(f"[LLM] Server error (HTTP {status}) on attempt {attempt + 1}/{total}")
                else:
                    raise LLMError(f"{label}: HTTP {status}")

            if attempt < total - 1:
                print(f"[LLM] Retrying in {wait_time:g}s...")
                self.sleep(wait_time)

        raise RetriesExhaustedError(f"{label}: {self.last_error} after {total} attempts", total)
