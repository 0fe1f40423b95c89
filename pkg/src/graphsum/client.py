"""LLM endpoint client: prompt budgeting, retries, and an on-disk cache.

Requests are built from the textualizer's templates; when the estimated
token count exceeds the input budget, article tails are trimmed equally
across the cluster. Instruction text and graph tables are never trimmed.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import requests

from .textualize import GraphTables, OneShotExample, PromptTemplate, render_hard_prompt

TOKENS_PER_WORD = 1.3  # provider-agnostic estimate: whitespace words x 1.3


class PromptKind(Enum):
    BASELINE = "baseline"
    GRAPH = "graph"
    ONE_SHOT = "one_shot"
    COT_GRAPH = "cot_graph"


# Kinds whose templates embed the textualized graph.
GRAPH_KINDS = frozenset({PromptKind.GRAPH})
EXAMPLE_KINDS = frozenset({PromptKind.ONE_SHOT, PromptKind.COT_GRAPH})


class ClientError(RuntimeError):
    pass


class BudgetError(ClientError):
    """The instruction alone exceeds the input budget."""


class AuthenticationError(ClientError):
    pass


class TransientError(ClientError):
    """Retryable failure (network hiccup, rate limit, 5xx)."""


class EndpointTimeout(ClientError):
    """Transient failures persisted through every retry attempt."""


class EmptyCompletionError(ClientError):
    pass


@dataclass(frozen=True)
class LlmRequest:
    model_id: str
    prompt: str
    max_input_tokens: int = 2048
    max_output_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_input_tokens <= 0 or self.max_output_tokens <= 0:
            raise ValueError("token budgets must be positive")
        if not self.prompt:
            raise ValueError("prompt must be non-empty")


@dataclass(frozen=True)
class SummaryRecord:
    cluster_id: str
    prompt_kind: str
    summary_text: str
    latency_ms: float
    provider_metadata: dict = field(default_factory=dict)


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text.split()) * TOKENS_PER_WORD)


def _truncate_words(text: str, drop: int) -> str:
    words = text.split()
    if drop <= 0 or not words:
        return text
    return " ".join(words[: max(0, len(words) - drop)])


def build_request(
    articles: Sequence[str],
    template: PromptTemplate,
    kind: PromptKind,
    tables: GraphTables | None = None,
    example: OneShotExample | None = None,
    model_id: str = "mock",
    max_input_tokens: int = 2048,
    max_output_tokens: int = 512,
    temperature: float = 0.0,
) -> tuple[LlmRequest, dict]:
    """Render the prompt for one cluster and enforce the input budget.

    Over-budget prompts lose words from the tail of every article in equal
    shares until they fit; the returned metadata records whether truncation
    happened. Raises BudgetError when even the instruction with empty
    articles cannot fit.
    """
    if kind in GRAPH_KINDS and tables is None:
        raise ClientError(f"prompt kind {kind.value} requires graph tables")

    def render(current: Sequence[str]) -> str:
        return render_hard_prompt(tables, current, template, example=example)

    instruction_size = estimate_tokens(render([""] * len(articles)))
    if instruction_size > max_input_tokens:
        raise BudgetError(
            f"instruction alone needs ~{instruction_size} tokens, budget is {max_input_tokens}"
        )

    current = [a for a in articles]
    truncated = False
    prompt = render(current)
    while estimate_tokens(prompt) > max_input_tokens:
        overage_words = math.ceil((estimate_tokens(prompt) - max_input_tokens) / TOKENS_PER_WORD)
        per_article = max(1, math.ceil(overage_words / len(current)))
        current = [_truncate_words(a, per_article) for a in current]
        truncated = True
        prompt = render(current)
    request = LlmRequest(
        model_id=model_id,
        prompt=prompt,
        max_input_tokens=max_input_tokens,
        max_output_tokens=max_output_tokens,
        temperature=temperature,
    )
    meta = {"truncated": truncated, "estimated_tokens": estimate_tokens(prompt)}
    return request, meta


SUMMARY_MARKER = "Summary:"


def extract_summary(completion: str, kind: PromptKind) -> str:
    """Chain-of-thought responses carry reasoning before the final summary;
    keep only the text after the last "Summary:" marker."""
    if kind is PromptKind.COT_GRAPH and SUMMARY_MARKER in completion:
        return completion.rsplit(SUMMARY_MARKER, 1)[1].strip()
    return completion.strip()


class Transport:
    """Completion backend interface."""

    def complete(self, request: LlmRequest) -> str:
        raise NotImplementedError


class HttpTransport(Transport):
    """JSON-over-HTTP backend: POST {model, prompt, max_tokens, temperature}
    to the endpoint, read {"text": ...} back."""

    def __init__(self, endpoint_url: str, api_key: str | None = None, timeout: float = 60.0):
        self.endpoint_url = endpoint_url
        self.api_key = api_key
        self.timeout = timeout

    def complete(self, request: LlmRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = requests.post(
                self.endpoint_url,
                json={
                    "model": request.model_id,
                    "prompt": request.prompt,
                    "max_tokens": request.max_output_tokens,
                    "temperature": request.temperature,
                },
                headers=headers,
                timeout=self.timeout,
            )
        except requests.Timeout as exc:
            raise TransientError(f"request timed out: {exc}") from exc
        except requests.ConnectionError as exc:
            raise TransientError(f"connection failed: {exc}") from exc
        if response.status_code in (401, 403):
            raise AuthenticationError(f"endpoint rejected credentials ({response.status_code})")
        if response.status_code >= 500 or response.status_code == 429:
            raise TransientError(f"endpoint returned {response.status_code}")
        if response.status_code != 200:
            raise ClientError(f"endpoint returned {response.status_code}: {response.text[:200]}")
        return response.json().get("text", "")


class MockTransport(Transport):
    """Canned-response backend for tests and fixture runs.

    Rules are (substring, response) pairs checked in order against the
    prompt; the first hit wins, else the default response. Counts calls so
    cache behavior is observable.
    """

    def __init__(
        self,
        rules: Sequence[tuple[str, str]] = (),
        default_response: str = "The articles report the same story.",
        fail_times: int = 0,
        failure: Callable[[], Exception] | None = None,
    ):
        self.rules = list(rules)
        self.default_response = default_response
        self.calls = 0
        self._fail_times = fail_times
        self._failure = failure or (lambda: TransientError("injected failure"))

    def complete(self, request: LlmRequest) -> str:
        self.calls += 1
        if self._fail_times > 0:
            self._fail_times -= 1
            raise self._failure()
        for needle, response in self.rules:
            if needle in request.prompt:
                return response
        return self.default_response


def load_mock_rules(path: str | Path) -> list[tuple[str, str]]:
    """Mock rule file: JSON list of {"contains": ..., "response": ...}."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [(entry["contains"], entry["response"]) for entry in payload]


def cache_key(request: LlmRequest) -> str:
    digest = hashlib.sha256()
    digest.update(request.model_id.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(request.prompt.encode("utf-8"))
    return digest.hexdigest()


class SummarizerClient:
    """Caches completions on disk and retries transient failures with
    exponential backoff (3 attempts by default)."""

    def __init__(
        self,
        transport: Transport,
        cache_dir: str | Path | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.2,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.transport = transport
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._cache_lock = threading.Lock()  # cache access serialized across workers

    def _cache_path(self, request: LlmRequest) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{cache_key(request)}.json"

    def _cache_read(self, path: Path | None):
        if path is None:
            return None
        with self._cache_lock:
            if not path.is_file():
                return None
            return json.loads(path.read_text(encoding="utf-8"))

    def summarize(self, request: LlmRequest, cluster_id: str, kind: PromptKind) -> SummaryRecord:
        path = self._cache_path(request)
        payload = self._cache_read(path)
        if payload is not None:
            return SummaryRecord(
                cluster_id=cluster_id,
                prompt_kind=kind.value,
                summary_text=payload["summary_text"],
                latency_ms=payload["latency_ms"],
                provider_metadata={**payload.get("provider_metadata", {}), "cache_hit": True},
            )

        last_error: Exception | None = None
        completion = None
        started = time.monotonic()
        for attempt in range(self.max_attempts):
            try:
                completion = self.transport.complete(request)
                break
            except TransientError as exc:
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.backoff_base * (2**attempt))
        else:
            raise EndpointTimeout(
                f"gave up after {self.max_attempts} attempts: {last_error}"
            ) from last_error
        latency_ms = (time.monotonic() - started) * 1000.0

        summary_text = extract_summary(completion, kind)
        if not summary_text:
            raise EmptyCompletionError(f"endpoint returned an empty completion for {cluster_id}")
        record = SummaryRecord(
            cluster_id=cluster_id,
            prompt_kind=kind.value,
            summary_text=summary_text,
            latency_ms=latency_ms,
            provider_metadata={"cache_hit": False},
        )
        if path is not None:
            payload = json.dumps(
                {
                    "summary_text": record.summary_text,
                    "latency_ms": record.latency_ms,
                    "provider_metadata": {"cache_hit": False},
                },
                ensure_ascii=False,
                indent=2,
            )
            with self._cache_lock:
                path.write_text(payload, encoding="utf-8")
        return record
