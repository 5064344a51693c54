"""Clients for OpenAI-compatible chat-completion and embedding endpoints.

:class:`HttpBackend` speaks the standard wire protocol (``POST
/v1/chat/completions`` and ``POST /v1/embeddings``) against any local or
hosted server.  :class:`MockBackend` is a pure-function stand-in whose
completion simply echoes the prompt back — which is exactly what makes
offline pipeline and coverage tests meaningful: every segment name that
appears in a prompt provably appears in the mock summary.

Both expose monotonically increasing call counters so cache tests can
assert that no request was issued.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass
from typing import List, Optional

import requests

CHAT_PATH = "/v1/chat/completions"
EMBEDDINGS_PATH = "/v1/embeddings"


class BackendError(Exception):
    """The backend could not produce a result (after retries, if any)."""


class ProtocolError(BackendError):
    """The server replied, but not with a usable protocol response."""


@dataclass(frozen=True)
class BackendConfig:
    """Connection settings for one OpenAI-compatible endpoint."""

    base_url: str
    model_id: str
    embedding_model_id: str = ""
    timeout_s: float = 120.0
    max_retries: int = 3
    temperature: float = 0.0
    api_key: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    max_output_tokens: int = 512
    temperature: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    model_id: str = ""
    latency_ms: float = 0.0


class Backend:
    """Shared counter bookkeeping for concrete backends."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._completions = 0
        self._embeddings = 0
        self._prompt_tokens = 0
        self._completion_tokens = 0

    @property
    def completion_calls(self) -> int:
        with self._lock:
            return self._completions

    @property
    def embedding_calls(self) -> int:
        with self._lock:
            return self._embeddings

    @property
    def total_prompt_tokens(self) -> int:
        with self._lock:
            return self._prompt_tokens

    @property
    def total_completion_tokens(self) -> int:
        with self._lock:
            return self._completion_tokens

    def _count_completion(self) -> None:
        with self._lock:
            self._completions += 1

    def _count_embedding(self) -> None:
        with self._lock:
            self._embeddings += 1

    def _add_usage(self, prompt_tokens: int, completion_tokens: int) -> None:
        with self._lock:
            self._prompt_tokens += prompt_tokens
            self._completion_tokens += completion_tokens

    def complete(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    def embed(self, texts: List[str]) -> List[List[float]]:
        raise NotImplementedError


def _check_embed_inputs(texts: List[str]) -> None:
    if not texts:
        raise ValueError("embed requires at least one text")
    if any(not t for t in texts):
        raise ValueError("embed inputs must all be non-empty")


class HttpBackend(Backend):
    """Client for a live endpoint, with exponential-backoff retries.

    HTTP 5xx, timeouts and connection failures are retried up to
    ``config.max_retries`` times with backoff starting at one second;
    4xx responses and malformed bodies fail immediately.
    """

    def __init__(self, config: BackendConfig, backoff_s: float = 1.0) -> None:
        super().__init__()
        self.config = config
        self._backoff_s = backoff_s

    @property
    def model_id(self) -> str:
        return self.config.model_id

    # -- wire plumbing ------------------------------------------------------

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + path
        attempts = self.config.max_retries + 1
        delay = self._backoff_s
        last_failure = "no attempt made"
        for attempt in range(attempts):
            if attempt:
                time.sleep(delay)
                delay *= 2
            try:
                response = requests.post(
                    url,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.config.timeout_s,
                )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_failure = f"{type(exc).__name__}: {exc}"
                continue
            if 400 <= response.status_code < 500:
                raise BackendError(
                    f"{url} returned {response.status_code}: {response.text[:200]}"
                )
            if response.status_code >= 500:
                last_failure = f"HTTP {response.status_code}"
                continue
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{url} returned unparseable JSON: {exc}") from exc
        raise BackendError(f"{url} failed after {attempts} attempts ({last_failure})")

    # -- operations ---------------------------------------------------------

    def complete(self, request: ChatRequest) -> ChatResponse:
        self._count_completion()
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        temperature = (
            self.config.temperature
            if request.temperature is None
            else request.temperature
        )
        payload = {
            "model": self.config.model_id,
            "messages": messages,
            "temperature": temperature,
            "max_tokens": request.max_output_tokens,
        }
        started = time.monotonic()
        data = self._post(CHAT_PATH, payload)
        latency_ms = (time.monotonic() - started) * 1000.0
        choices = data.get("choices") or []
        if not choices:
            raise ProtocolError(f"response has no choices: {json.dumps(data)[:200]}")
        try:
            text = choices[0]["message"]["content"]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed choice object: {exc}") from exc
        usage = data.get("usage") or {}
        response = ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            model_id=data.get("model", self.config.model_id),
            latency_ms=latency_ms,
        )
        self._add_usage(response.prompt_tokens, response.completion_tokens)
        return response

    def embed(self, texts: List[str]) -> List[List[float]]:
        _check_embed_inputs(texts)
        self._count_embedding()
        payload = {
            "model": self.config.embedding_model_id or self.config.model_id,
            "input": list(texts),
        }
        data = self._post(EMBEDDINGS_PATH, payload)
        items = data.get("data")
        if not isinstance(items, list) or len(items) != len(texts):
            raise ProtocolError(
                f"expected {len(texts)} embeddings, got "
                f"{len(items) if isinstance(items, list) else 'no data list'}"
            )
        vectors: List[List[float]] = [[] for _ in texts]
        for position, item in enumerate(items):
            try:
                index = int(item.get("index", position))
                vectors[index] = [float(x) for x in item["embedding"]]
            except (KeyError, TypeError, IndexError) as exc:
                raise ProtocolError(f"malformed embedding object: {exc}") from exc
        dimensions = {len(v) for v in vectors}
        if len(dimensions) != 1:
            raise ProtocolError(f"embedding dimensions differ within batch: {dimensions}")
        return vectors


_WORD_RE = re.compile(r"[a-z0-9]+")
MOCK_DIMENSIONS = 8


def _mock_vector(text: str) -> List[float]:
    vector = [0.0] * MOCK_DIMENSIONS
    for word in _WORD_RE.findall(text.lower()):
        digest = hashlib.sha256(word.encode("utf-8")).digest()
        vector[digest[0] % MOCK_DIMENSIONS] += 1.0
    norm = sum(x * x for x in vector) ** 0.5
    if norm:
        vector = [x / norm for x in vector]
    return vector


class MockBackend(Backend):
    """Offline deterministic backend.

    Completion returns ``"ECHO:\\n" + user_text`` so any text placed in a
    prompt survives verbatim into the "summary".  Embedding returns an
    8-dimensional L2-normalized bag of hashed words, so equal texts map to
    equal vectors and word overlap yields high cosine similarity.
    """

    def __init__(self, model_id: str = "mock") -> None:
        super().__init__()
        self.model_id = model_id

    def complete(self, request: ChatRequest) -> ChatResponse:
        self._count_completion()
        text = "ECHO:\n" + request.user_text
        response = ChatResponse(
            text=text,
            prompt_tokens=len(request.system_text.split()) + len(request.user_text.split()),
            completion_tokens=len(text.split()),
            model_id=self.model_id,
            latency_ms=0.0,
        )
        self._add_usage(response.prompt_tokens, response.completion_tokens)
        return response

    def embed(self, texts: List[str]) -> List[List[float]]:
        _check_embed_inputs(texts)
        self._count_embedding()
        return [_mock_vector(t) for t in texts]
