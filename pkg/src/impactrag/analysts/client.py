"""OpenAI-compatible chat client with retries, rate limiting and an offline mock."""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import httpx
from loguru import logger

TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class AnalystError(RuntimeError):
    """A model call failed for good (after retries, or on a non-retryable reply)."""


@dataclass(frozen=True)
class Message:
    role: str
    content: str
    attachments: tuple[str, ...] = ()

    def to_wire(self) -> dict:
        if not self.attachments:
            return {"role": self.role, "content": self.content}
        parts: list[dict] = [{"type": "text", "text": self.content}]
        parts += [{"type": "image_url", "image_url": {"url": uri}} for uri in self.attachments]
        return {"role": self.role, "content": parts}


def prompt_hash(messages: Sequence[Message]) -> str:
    payload = json.dumps([m.to_wire() for m in messages], sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class MockBackend:
    """Deterministic stand-in for a chat model.

    Lookup order: exact prompt hash, then the first rule whose ``contains``
    substrings all occur in the joined message text, then ``default``.
    Responses that are not strings are serialized as JSON.
    """

    def __init__(self, by_hash: Mapping[str, Any] | None = None,
                 rules: Sequence[Mapping[str, Any]] = (), default: Any = None):
        self.by_hash = dict(by_hash or {})
        self.rules = list(rules)
        self.default = default
        self._lock = threading.Lock()
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(data.get("by_hash"), data.get("rules", ()), data.get("default"))

    def register(self, messages: Sequence[Message], response: Any) -> str:
        key = prompt_hash(messages)
        self.by_hash[key] = response
        return key

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, messages: Sequence[Message]) -> str:
        key = prompt_hash(messages)
        with self._lock:
            self.calls.append(key)
        if key in self.by_hash:
            return _as_text(self.by_hash[key])
        text = "\n".join(m.content for m in messages)
        for rule in self.rules:
            if all(s in text for s in rule.get("contains", ())):
                return _as_text(rule["response"])
        if self.default is not None:
            return _as_text(self.default)
        raise AnalystError(f"mock has no response for prompt {key[:12]}")


def _as_text(response: Any) -> str:
    return response if isinstance(response, str) else json.dumps(response, ensure_ascii=False)


class RateLimiter:
    """Token bucket: ``rpm`` requests per minute, bursts up to ``burst``."""

    def __init__(self, rpm: float, burst: int | None = None):
        self.rate = rpm / 60.0
        self.capacity = float(burst or max(1, int(rpm)))
        self.tokens = self.capacity
        self.stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.stamp) * self.rate)
                self.stamp = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            time.sleep(wait)


_LIMITERS: dict[tuple, RateLimiter] = {}
_LIMITERS_LOCK = threading.Lock()


@dataclass(frozen=True)
class ClientConfig:
    kind: str = "openai"  # or "mock"
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    api_key_env: str | None = "OPENAI_API_KEY"
    temperature: float = 0.0
    timeout: float = 120.0
    max_attempts: int = 3
    backoff_base: float = 1.0
    rpm: float | None = None
    mock: MockBackend | None = field(default=None, compare=False, hash=False)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any] | str, base_dir: Path | None = None) -> "ClientConfig":
        if data == "mock":
            return cls(kind="mock", mock=MockBackend())
        data = dict(data)
        mock = None
        if data.get("kind") == "mock":
            fixture = data.pop("fixtures", None)
            if fixture:
                path = Path(fixture)
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                mock = MockBackend.from_file(path)
            else:
                mock = MockBackend(default=data.pop("default", None))
        data.pop("default", None)
        return cls(**data, mock=mock)

    def limiter(self) -> RateLimiter | None:
        if not self.rpm:
            return None
        key = (self.base_url, self.model, self.rpm)
        with _LIMITERS_LOCK:
            if key not in _LIMITERS:
                _LIMITERS[key] = RateLimiter(self.rpm)
            return _LIMITERS[key]


def chat_complete(
    endpoint: ClientConfig,
    messages: Sequence[Message],
    client: httpx.Client | None = None,
    sleep=time.sleep,
) -> str:
    """Send ``messages`` and return the assistant text.

    Transport errors, timeouts, 429 and 5xx are retried with exponential
    backoff (``backoff_base * 2**(attempt - 1)`` before retry ``attempt``); other non-2xx replies fail at once.
    """
    if endpoint.kind == "mock":
        if endpoint.mock is None:
            raise AnalystError("mock endpoint without a backend")
        return endpoint.mock.complete(messages)
    if endpoint.kind != "openai":
        raise ValueError(f"unknown client kind {endpoint.kind!r}")

    headers = {"Content-Type": "application/json"}
    key = os.environ.get(endpoint.api_key_env or "", "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    body = {
        "model": endpoint.model,
        "messages": [m.to_wire() for m in messages],
        "temperature": endpoint.temperature,
    }
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    owned = client is None
    http = client or httpx.Client(timeout=endpoint.timeout)
    limiter = endpoint.limiter()
    last: Exception | None = None
    try:
        for attempt in range(endpoint.max_attempts):
            if attempt:
                sleep(endpoint.backoff_base * 2 ** (attempt - 1))
            if limiter:
                limiter.acquire()
            try:
                resp = http.post(url, json=body, headers=headers, timeout=endpoint.timeout)
            except httpx.TransportError as exc:
                last = exc
                logger.warning("chat attempt {}/{} failed: {!r}", attempt + 1, endpoint.max_attempts, exc)
                continue
            if resp.status_code in TRANSIENT_STATUS:
                last = AnalystError(f"HTTP {resp.status_code}")
                logger.warning("chat attempt {}/{} got HTTP {}", attempt + 1, endpoint.max_attempts, resp.status_code)
                continue
            if not resp.is_success:
                raise AnalystError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise AnalystError(f"malformed completion payload: {exc}") from exc
            if isinstance(content, list):
                content = "".join(p.get("text", "") for p in content if isinstance(p, dict))
            return content or ""
    finally:
        if owned:
            http.close()
    raise AnalystError(f"chat request failed after {endpoint.max_attempts} attempts: {last!r}")
