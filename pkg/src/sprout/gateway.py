"""Uniform access to chat completion and embeddings.

Two interchangeable backends: an OpenAI-compatible HTTP service for real
runs, and a scripted deterministic mock that makes every test and fixture
run offline, byte-identically, forever.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import httpx

from .errors import InvalidArgument, RateLimited, TransportError, Unauthorized

EMBED_DIM = 64
RETRY_ATTEMPTS = 3
RETRY_BACKOFF = (0.5, 1.0, 2.0)

#: Defaults per completion purpose: generation explores, voting and
#: extraction must be maximally deterministic.
GENERATION_TEMPERATURE = 0.7
VOTING_TEMPERATURE = 0.0
EXTRACTION_TEMPERATURE = 0.0


class FinishReason(str, Enum):
    STOP = "Stop"
    LENGTH = "Length"
    ERROR = "Error"


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = GENERATION_TEMPERATURE
    max_tokens: int = 2048
    seed: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise InvalidArgument("messages must be non-empty")
        if self.messages[0].role != "system":
            raise InvalidArgument("first message must be the system preamble")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidArgument("temperature must be in [0, 2]")
        if self.max_tokens < 1:
            raise InvalidArgument("max_tokens must be positive")

    @property
    def last_user_message(self) -> str:
        for message in reversed(self.messages):
            if message.role == "user":
                return message.content
        return ""


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: FinishReason = FinishReason.STOP


class StreamSink(Protocol):
    def on_fragment(self, text: str) -> None: ...

    def on_error(self, error: Exception) -> None: ...


class CollectingSink:
    """Buffers fragments; handy for tests and the CLI."""

    def __init__(self):
        self.fragments: list[str] = []
        self.error: Exception | None = None

    def on_fragment(self, text: str) -> None:
        self.fragments.append(text)

    def on_error(self, error: Exception) -> None:
        self.error = error

    @property
    def text(self) -> str:
        return "".join(self.fragments)


def _as_sink(sink) -> StreamSink:
    if hasattr(sink, "on_fragment"):
        return sink
    if callable(sink):

        class _Wrapped:
            def on_fragment(self, text: str) -> None:
                sink(text)

            def on_error(self, error: Exception) -> None:
                pass

        return _Wrapped()
    raise InvalidArgument("sink must expose on_fragment or be callable")


class Gateway(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...

    def stream_complete(self, request: ChatRequest, sink) -> ChatResponse: ...

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


# ---------------------------------------------------------------------------
# Mock backend
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MockRule:
    """First-match-wins rule. ``match`` is one substring or several that must
    all occur in the last user message."""

    match: tuple[str, ...]
    response: str

    def matches(self, text: str) -> bool:
        return all(m in text for m in self.match)


@dataclass(frozen=True)
class MockScript:
    rules: tuple[MockRule, ...] = ()
    default_response: str = ""
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> MockScript:
        rules = []
        for raw in data.get("rules", []):
            match = raw["match"]
            if isinstance(match, str):
                match = (match,)
            else:
                match = tuple(match)
            rules.append(MockRule(match=match, response=raw["response"]))
        return cls(
            rules=tuple(rules),
            default_response=data.get("default", ""),
            seed=int(data.get("seed", 0)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> MockScript:
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    def respond(self, last_user_message: str) -> str:
        for rule in self.rules:
            if rule.matches(last_user_message):
                return rule.response
        return self.default_response


def split_fragments(content: str) -> list[str]:
    """Split at whitespace, keeping separators so fragments concatenate back
    to the original string exactly."""
    if not content:
        return []
    return re.findall(r"\S*\s+|\S+$", content)


def trigram_vector(text: str, seed: int = 0, dim: int = EMBED_DIM) -> list[float]:
    """Deterministic unit-norm embedding: character trigrams hashed into
    ``dim`` buckets. Preserves coarse lexical similarity, nothing more."""
    if not text:
        raise InvalidArgument("cannot embed empty text")
    grams = [text[i : i + 3] for i in range(len(text) - 2)] if len(text) >= 3 else [text]
    counts = [0.0] * dim
    for gram in grams:
        digest = hashlib.md5(f"{seed}|{gram}".encode("utf-8")).digest()
        counts[int.from_bytes(digest[:8], "big") % dim] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    return [c / norm for c in counts]


class MockGateway:
    """A pure function of (script, request). Bit-identical across runs."""

    def __init__(self, script: MockScript):
        self.script = script

    def complete(self, request: ChatRequest) -> ChatResponse:
        content = self.script.respond(request.last_user_message)
        return ChatResponse(content=content, finish_reason=FinishReason.STOP)

    def stream_complete(self, request: ChatRequest, sink) -> ChatResponse:
        sink = _as_sink(sink)
        response = self.complete(request)
        for fragment in split_fragments(response.content):
            sink.on_fragment(fragment)
        return response

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            raise InvalidArgument("texts must be non-empty")
        return [trigram_vector(t, seed=self.script.seed) for t in texts]


# ---------------------------------------------------------------------------
# Remote backend (OpenAI-compatible wire schema)
# ---------------------------------------------------------------------------

API_KEY_ENV = "SPROUT_API_KEY"
API_BASE_ENV = "SPROUT_API_BASE"


class RemoteGateway:
    """Talks to ``{base_url}/chat/completions`` and ``{base_url}/embeddings``.

    Transient failures (connect errors, 429, 5xx) are retried up to
    RETRY_ATTEMPTS total attempts with exponential backoff; the raised error
    carries the attempt count.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str = "gpt-3.5-turbo",
        embedding_model: str = "text-embedding-ada-002",
        attempts: int = RETRY_ATTEMPTS,
        backoff: Sequence[float] = RETRY_BACKOFF,
        sleeper: Callable[[float], None] = time.sleep,
        timeout: float = 60.0,
    ):
        self.base_url = (base_url or os.environ.get(API_BASE_ENV, "")).rstrip("/")
        if not self.base_url:
            raise InvalidArgument(f"no base URL; set {API_BASE_ENV}")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.model = model
        self.embedding_model = embedding_model
        self.attempts = attempts
        self.backoff = tuple(backoff)
        self.sleeper = sleeper
        self.client = httpx.Client(timeout=timeout)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _sleep_before_retry(self, attempt: int) -> None:
        delay = self.backoff[min(attempt - 1, len(self.backoff) - 1)]
        self.sleeper(delay)

    def _post_with_retries(self, path: str, body: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(1, self.attempts + 1):
            try:
                response = self.client.post(
                    f"{self.base_url}{path}", json=body, headers=self._headers()
                )
            except httpx.HTTPError as exc:
                last_error = TransportError(str(exc), attempts=attempt)
            else:
                if response.status_code in (401, 403):
                    raise Unauthorized("credential rejected", attempts=attempt)
                if response.status_code == 429:
                    last_error = RateLimited("rate limited", attempts=attempt)
                elif response.status_code >= 500:
                    last_error = TransportError(
                        f"server error {response.status_code}", attempts=attempt
                    )
                else:
                    response.raise_for_status()
                    return response.json()
            if attempt < self.attempts:
                self._sleep_before_retry(attempt)
        assert last_error is not None
        raise last_error

    def complete(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            body["seed"] = request.seed
        data = self._post_with_retries("/chat/completions", body)
        choice = data["choices"][0]
        content = choice["message"]["content"]
        reason = {
            "stop": FinishReason.STOP,
            "length": FinishReason.LENGTH,
        }.get(choice.get("finish_reason", "stop"), FinishReason.ERROR)
        return ChatResponse(content=content, finish_reason=reason)

    def stream_complete(self, request: ChatRequest, sink) -> ChatResponse:
        sink = _as_sink(sink)
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stream": True,
        }
        last_error: Exception | None = None
        for attempt in range(1, self.attempts + 1):
            parts: list[str] = []
            started = False
            retry_error: Exception | None = None
            try:
                with self.client.stream(
                    "POST",
                    f"{self.base_url}/chat/completions",
                    json=body,
                    headers=self._headers(),
                ) as response:
                    if response.status_code in (401, 403):
                        raise Unauthorized("credential rejected", attempts=attempt)
                    if response.status_code == 429:
                        retry_error = RateLimited("rate limited", attempts=attempt)
                    elif response.status_code >= 500:
                        retry_error = TransportError(
                            f"server error {response.status_code}", attempts=attempt
                        )
                    else:
                        for line in response.iter_lines():
                            if not line.startswith("data:"):
                                continue
                            payload = line[len("data:") :].strip()
                            if payload == "[DONE]":
                                break
                            chunk = json.loads(payload)
                            delta = chunk["choices"][0].get("delta", {})
                            fragment = delta.get("content")
                            if fragment:
                                started = True
                                parts.append(fragment)
                                sink.on_fragment(fragment)
                        return ChatResponse(
                            content="".join(parts), finish_reason=FinishReason.STOP
                        )
            except httpx.HTTPError as exc:
                error = TransportError(str(exc), attempts=attempt)
                if started:
                    # Mid-stream drop: fragments already went out; retrying
                    # would deliver a duplicate prefix.
                    if hasattr(sink, "on_error"):
                        sink.on_error(error)
                    raise error from exc
                retry_error = error
            last_error = retry_error
            if attempt < self.attempts:
                self._sleep_before_retry(attempt)
        assert last_error is not None
        if hasattr(sink, "on_error"):
            sink.on_error(last_error)
        raise last_error

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            raise InvalidArgument("texts must be non-empty")
        data = self._post_with_retries(
            "/embeddings", {"model": self.embedding_model, "input": list(texts)}
        )
        return [item["embedding"] for item in data["data"]]


def system_user(system: str, user: str, *, temperature: float, seed: int | None = None) -> ChatRequest:
    """The two-message request shape every engine call uses."""
    return ChatRequest(
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        temperature=temperature,
        seed=seed,
    )
