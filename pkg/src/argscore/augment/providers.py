"""Completion providers: a chat-completions HTTP client, a seeded offline mock,
and a canned lookup provider for tests and synthetic pipelines."""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import requests

from argscore.augment.prompts import NO_ASSUMPTIONS, AugmentationKind

EPOCH_TIMESTAMP = "1970-01-01T00:00:00Z"


class ProviderError(Exception):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body[:200]


class ProviderTimeout(Exception):
    pass


@dataclass
class ProviderConfig:
    base_url: str
    model_name: str = "gpt-3.5-turbo"
    temperature: float = 0.7
    max_tokens: int = 512
    api_key_env: str = "ARGSCORE_API_KEY"
    request_timeout: float = 60.0
    max_parallel: int = 4

    def __post_init__(self):
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be > 0")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    @classmethod
    def from_json(cls, path: str | Path) -> "ProviderConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


class HttpProvider:
    """POSTs one user message per prompt to ``{base_url}/chat/completions``.

    Transient failures (timeouts, connection errors, 429, 5xx) are retried
    twice with exponential backoff starting at one second.
    """

    name = "http"
    MAX_ATTEMPTS = 3
    BACKOFF_START = 1.0

    def __init__(self, config: ProviderConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        self.requests_made = 0
        self._lock = threading.Lock()

    @property
    def model_name(self) -> str:
        return self.config.model_name

    @property
    def temperature(self) -> float:
        return self.config.temperature

    def timestamp(self) -> str:
        return datetime.now(timezone.utc).isoformat()

    def complete(self, kind: AugmentationKind, prompt: str) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        backoff = self.BACKOFF_START
        last_exc: Exception | None = None
        for attempt in range(self.MAX_ATTEMPTS):
            if attempt:
                time.sleep(backoff)
                backoff *= 2
            with self._lock:
                self.requests_made += 1
            try:
                response = self.session.post(
                    url, json=body, headers=headers, timeout=self.config.request_timeout
                )
            except requests.Timeout:
                last_exc = ProviderTimeout(f"request timed out after {self.config.request_timeout}s")
                continue
            except requests.ConnectionError as exc:
                last_exc = ProviderError(0, f"connection error: {exc}")
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_exc = ProviderError(response.status_code, response.text)
                continue
            if response.status_code != 200:
                raise ProviderError(response.status_code, response.text)
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise ProviderError(response.status_code, f"unparseable body: {exc}")
        assert last_exc is not None
        raise last_exc


_FEEDBACK_PHRASES = [
    "the claim is stated clearly",
    "the argument lacks supporting evidence",
    "the tone is emotional rather than factual",
    "the conclusion does not follow from the premise",
    "examples would strengthen the point",
    "the argument stays on topic",
    "counterpoints are not addressed",
    "the structure is easy to follow",
]

_ASSUMPTION_PHRASES = [
    "the reader shares the author's values",
    "the cited trend will continue",
    "the majority opinion is correct",
    "no alternative explanation exists",
    "the example generalizes to all cases",
    "the costs are negligible",
]

_ARGUMENT_PHRASES = [
    "the evidence points the other way",
    "this view overlooks practical limits",
    "history offers several counterexamples",
    "the benefits outweigh the drawbacks",
    "both sides rely on contested data",
    "a middle ground remains possible",
    "the premise deserves closer scrutiny",
]


class MockProvider:
    """Deterministic offline provider: the response is a pure function of
    (kind, prompt, seed). The assumptions path can return the bare
    "No assumptions" sentinel."""

    name = "mock"
    model_name = "mock"
    temperature = 0.0

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.requests_made = 0
        self._lock = threading.Lock()

    def timestamp(self) -> str:
        return EPOCH_TIMESTAMP

    def complete(self, kind: AugmentationKind, prompt: str) -> str:
        with self._lock:
            self.requests_made += 1
        digest = hashlib.sha256(
            f"{kind.value}\x00{self.seed}\x00{prompt}".encode("utf-8")
        ).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        if kind is AugmentationKind.ASSUMPTIONS and rng.random() < 0.15:
            return NO_ASSUMPTIONS
        if kind is AugmentationKind.FEEDBACK:
            pool, bullets = _FEEDBACK_PHRASES, rng.randint(2, 4)
            return "\n".join("- " + rng.choice(pool) for _ in range(bullets))
        if kind is AugmentationKind.ASSUMPTIONS:
            pool, bullets = _ASSUMPTION_PHRASES, rng.randint(1, 3)
            return "\n".join("- " + rng.choice(pool) for _ in range(bullets))
        sentences = [rng.choice(_ARGUMENT_PHRASES).capitalize() + "." for _ in range(rng.randint(2, 4))]
        return " ".join(sentences)


class CannedProvider:
    """Serves pre-registered responses keyed by the sha256 of the rendered prompt."""

    name = "canned"
    model_name = "canned"
    temperature = 0.0

    def __init__(self, responses: dict[str, str]):
        self.responses = responses
        self.requests_made = 0
        self._lock = threading.Lock()

    @staticmethod
    def prompt_key(prompt: str) -> str:
        return hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    def timestamp(self) -> str:
        return EPOCH_TIMESTAMP

    def complete(self, kind: AugmentationKind, prompt: str) -> str:
        with self._lock:
            self.requests_made += 1
        key = self.prompt_key(prompt)
        if key not in self.responses:
            raise ProviderError(404, f"no canned response for {kind.value} prompt {key[:12]}")
        return self.responses[key]
