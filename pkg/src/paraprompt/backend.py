"""Clients for external generation and embedding services, plus a mock.

All neural computation lives behind this boundary. The wire protocol is
a minimal self-owned pair of JSON-over-HTTP endpoints:

    POST <generation_url>   {"prompt": str, "max_new_tokens": int,
                             "stop": [str], "request_id": str,
                             "layout": {...}?}
                         -> {"text": str, "token_count": int}
    POST <embedding_url>    {"texts": [str], "model": str}
                         -> {"vectors": [[float]]}

Structured layouts ride along under "layout" for backends that bind soft
slots; text-only backends ignore the key. Prompts that exceed the
backend's budget come back as HTTP 413 (or a "prompt_too_long" error
body) and surface as ``PromptBudgetError`` carrying the token count.

URLs with the "mock:" scheme select the in-process deterministic mock,
e.g. "mock:echo?seed=1" for generation or "mock:hash?dim=16" for
embeddings. Transport failures are retried up to the configured limit;
malformed responses never are.
"""

from __future__ import annotations

import hashlib
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence
from urllib.parse import parse_qs, urlparse

import numpy as np
import requests

from .textcore import DEFAULT_NORMALIZATION, NormalizationConfig, TokenSeq, normalize
from .promptkit import TextTemplate, DEFAULT_TEMPLATE
from .novelty import NoveltyClass

GENERATION_URL_ENV = "PARAPROMPT_GENERATION_URL"
EMBEDDING_URL_ENV = "PARAPROMPT_EMBEDDING_URL"

DEFAULT_MAX_NEW_TOKENS = 100


class BackendError(RuntimeError):
    pass


class TransportError(BackendError):
    """Network-level failure; retryable."""


class MalformedResponseError(BackendError):
    """The service answered, but not in the agreed shape; never retried."""


class PromptBudgetError(BackendError):
    def __init__(self, prompt_tokens: int | None) -> None:
        super().__init__(f"backend rejected over-budget prompt (n={prompt_tokens})")
        self.prompt_tokens = prompt_tokens


class CompletionParseError(BackendError):
    def __init__(self, message: str, raw: str) -> None:
        super().__init__(message)
        self.raw = raw


class EmptyParaphraseError(CompletionParseError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    generation_url: str = "mock:echo"
    embedding_url: str = "mock:hash"
    embedding_model_name: str = "paraphrase-mpnet-base-v2"
    timeout: float = 30.0
    max_in_flight: int = 4
    retry_limit: int = 2
    auth_token: str | None = None

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retry_limit < 1:
            raise ValueError("retry_limit must be >= 1")

    def resolved(self) -> "BackendConfig":
        """Apply environment URL overrides."""
        gen = os.environ.get(GENERATION_URL_ENV, self.generation_url)
        emb = os.environ.get(EMBEDDING_URL_ENV, self.embedding_url)
        if gen == self.generation_url and emb == self.embedding_url:
            return self
        return BackendConfig(
            generation_url=gen,
            embedding_url=emb,
            embedding_model_name=self.embedding_model_name,
            timeout=self.timeout,
            max_in_flight=self.max_in_flight,
            retry_limit=self.retry_limit,
            auth_token=self.auth_token,
        )


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    stop: tuple[str, ...] = ()
    request_id: str = ""
    layout_json: dict | None = None

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    token_count: int
    latency: float = 0.0


def _truncate_at_stop(text: str, stop: Sequence[str]) -> str:
    for marker in stop:
        idx = text.find(marker)
        if idx >= 0:
            text = text[:idx]
    return text


class GenerationBackend(Protocol):
    def generate(self, request: GenerationRequest) -> GenerationResponse: ...
    def count_tokens(self, text: str) -> int: ...


class EmbeddingBackend(Protocol):
    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class MockBackend:
    """Deterministic in-process stand-in for both services.

    Generation modes:
      echo     complete with the first line after the final "Paraphrase:"
               marker; when that marker sits on the prompt's final line
               (the usual case for generation prompts, with or without a
               class tag), fall back to repeating the final "Input:"
               line, so pipelines behave like a copy model.
      shuffle  like echo, but deterministically shuffles the tokens using
               the seed and the prompt digest.
      constant always answer ``constant_text``.

    Embeddings hash the text to a unit vector, so equal texts always get
    equal vectors. Instrumentation tracks concurrent in-flight requests
    and per-request-id completions for the client-behavior tests.
    """

    def __init__(
        self,
        mode: str = "echo",
        seed: int = 0,
        dim: int = 16,
        constant_text: str = "ok",
        fail_first_attempts: int = 0,
    ) -> None:
        if mode not in ("echo", "shuffle", "constant"):
            raise ValueError(f"unknown mock mode {mode!r}")
        if dim < 1:
            raise ValueError("embedding dim must be >= 1")
        self.mode = mode
        self.seed = seed
        self.dim = dim
        self.constant_text = constant_text
        self.fail_first_attempts = fail_first_attempts
        self._lock = threading.Lock()
        self._in_flight = 0
        self.max_in_flight_observed = 0
        self.completed_ids: list[str] = []
        self._attempts: dict[str, int] = {}

    def _enter(self) -> None:
        with self._lock:
            self._in_flight += 1
            self.max_in_flight_observed = max(self.max_in_flight_observed, self._in_flight)

    def _exit(self) -> None:
        with self._lock:
            self._in_flight -= 1

    def _completion_for(self, prompt: str) -> str:
        marker = "Paraphrase:"
        tail = prompt[prompt.rfind(marker) + len(marker):] if marker in prompt else ""
        line = tail.split("\n", 1)[0].strip() if "\n" in tail else ""
        if not line:
            # The final marker sits on the prompt's last line (possibly
            # with a class tag after it), so there is nothing to echo
            # yet: act as a copy model on the query.
            input_marker = "Input:"
            idx = prompt.rfind(input_marker)
            if idx >= 0:
                line = prompt[idx + len(input_marker):].split("\n", 1)[0].strip()
        if self.mode == "shuffle" and line:
            tokens = line.split()
            digest = hashlib.sha256(f"{self.seed}:{prompt}".encode()).hexdigest()
            random.Random(int(digest[:16], 16)).shuffle(tokens)
            line = " ".join(tokens)
        return line

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        started = time.monotonic()
        self._enter()
        try:
            with self._lock:
                attempt = self._attempts.get(request.request_id, 0) + 1
                self._attempts[request.request_id] = attempt
            if attempt <= self.fail_first_attempts:
                raise TransportError(f"simulated transport failure (attempt {attempt})")
            if self.mode == "constant":
                text = self.constant_text
            else:
                text = self._completion_for(request.prompt)
            text = _truncate_at_stop(text, request.stop)
            with self._lock:
                self.completed_ids.append(request.request_id)
            return GenerationResponse(
                text=text,
                token_count=self.count_tokens(text),
                latency=time.monotonic() - started,
            )
        finally:
            self._exit()

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("embed needs at least one text")
        out = []
        for text in texts:
            digest = hashlib.sha256(f"{self.seed}:{text}".encode()).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            vec = np.array([rng.gauss(0.0, 1.0) for _ in range(self.dim)])
            norm = float(np.linalg.norm(vec))
            out.append(vec / norm if norm else vec + 1.0 / self.dim**0.5)
        return out

    def count_tokens(self, text: str) -> int:
        return len(text.split())


class HttpBackend:
    """JSON-over-HTTP client for the two service endpoints."""

    def __init__(self, config: BackendConfig) -> None:
        self.config = config

    def _headers(self) -> dict[str, str]:
        if self.config.auth_token:
            return {"Authorization": f"Bearer {self.config.auth_token}"}
        return {}

    def _post(self, url: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(self.config.retry_limit):
            try:
                response = requests.post(
                    url, json=payload, timeout=self.config.timeout, headers=self._headers()
                )
            except (requests.ConnectionError, requests.Timeout) as err:
                last_error = err
                continue
            if response.status_code == 413:
                raise PromptBudgetError(_budget_tokens(response))
            if response.status_code >= 400:
                body = _safe_json(response)
                if isinstance(body, dict) and body.get("error") == "prompt_too_long":
                    raise PromptBudgetError(body.get("token_count"))
                raise MalformedResponseError(
                    f"{url} answered HTTP {response.status_code}: {response.text[:200]}"
                )
            body = _safe_json(response)
            if body is None:
                raise MalformedResponseError(f"{url} returned non-JSON body")
            return body
        raise TransportError(
            f"{url} unreachable after {self.config.retry_limit} attempts: {last_error}"
        )

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        payload = {
            "prompt": request.prompt,
            "max_new_tokens": request.max_new_tokens,
            "stop": list(request.stop),
            "request_id": request.request_id,
        }
        if request.layout_json is not None:
            payload["layout"] = request.layout_json
        started = time.monotonic()
        body = self._post(self.config.generation_url, payload)
        if "text" not in body or "token_count" not in body:
            raise MalformedResponseError(f'generation response missing "text"/"token_count": {body}')
        text = _truncate_at_stop(str(body["text"]), request.stop)
        return GenerationResponse(
            text=text,
            token_count=int(body["token_count"]),
            latency=time.monotonic() - started,
        )

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("embed needs at least one text")
        body = self._post(
            self.config.embedding_url,
            {"texts": list(texts), "model": self.config.embedding_model_name},
        )
        if "vectors" not in body or not isinstance(body["vectors"], list):
            raise MalformedResponseError(f'embedding response missing "vectors": {body}')
        vectors = [np.asarray(v, dtype=np.float64) for v in body["vectors"]]
        if len(vectors) != len(texts):
            raise MalformedResponseError(
                f"{len(vectors)} vectors for {len(texts)} texts"
            )
        dims = {v.shape for v in vectors}
        if len(dims) > 1:
            raise MalformedResponseError(f"mixed vector dimensions in one batch: {dims}")
        return vectors

    def count_tokens(self, text: str) -> int:
        # The wire protocol has no counting endpoint; whitespace tokens
        # are the documented approximation for HTTP backends.
        return len(text.split())


def _safe_json(response) -> dict | None:
    try:
        return response.json()
    except ValueError:
        return None


def _budget_tokens(response) -> int | None:
    body = _safe_json(response)
    if isinstance(body, dict) and "token_count" in body:
        return int(body["token_count"])
    return None


def _parse_mock_url(url: str) -> dict:
    parsed = urlparse(url)
    options = {k: v[-1] for k, v in parse_qs(parsed.query).items()}
    options["mode"] = parsed.path or "echo"
    return options


def make_generation_backend(config: BackendConfig) -> GenerationBackend:
    config = config.resolved()
    if config.generation_url.startswith("mock:"):
        opts = _parse_mock_url(config.generation_url)
        return MockBackend(
            mode=opts.get("mode", "echo"),
            seed=int(opts.get("seed", 0)),
            constant_text=opts.get("text", "ok"),
        )
    return HttpBackend(config)


def make_embedding_backend(config: BackendConfig) -> EmbeddingBackend:
    config = config.resolved()
    if config.embedding_url.startswith("mock:"):
        opts = _parse_mock_url(config.embedding_url)
        return MockBackend(mode="echo", seed=int(opts.get("seed", 0)), dim=int(opts.get("dim", 16)))
    return HttpBackend(config)


def generate_batch(
    backend: GenerationBackend,
    requests_list: Sequence[GenerationRequest],
    max_in_flight: int = 4,
) -> list[GenerationResponse]:
    """Run requests concurrently (bounded), returning responses in order."""
    if not requests_list:
        return []
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(backend.generate, requests_list))


def parse_completion(
    raw: str,
    template: TextTemplate = DEFAULT_TEMPLATE,
    query_class: NoveltyClass | None = None,
    cfg: NormalizationConfig = DEFAULT_NORMALIZATION,
) -> TokenSeq:
    """Extract the paraphrase from prompt+completion text.

    Looks for the final query-infix marker, keeps the first line after
    it, and normalizes. Raises ``CompletionParseError`` when the marker
    is missing and ``EmptyParaphraseError`` when nothing follows it.
    """
    marker = template.infix_realization(query_class)
    idx = raw.rfind(marker)
    if idx < 0:
        raise CompletionParseError(f"completion lacks the {marker!r} marker", raw)
    tail = raw[idx + len(marker):].split("\n", 1)[0]
    tokens = normalize(tail, cfg)
    if not tokens:
        raise EmptyParaphraseError("completion is empty after the infix marker", raw)
    return tokens
