"""Text-generation backends: HTTP chat-completion, replay, and scripted mocks.

Every test and offline pipeline run works against the mock or replay
backends; the HTTP client is the only component that touches a network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol

import httpx

from .errors import BackendError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Usage:
    """Token and call accounting; additive under ``+``."""

    input_tokens: int = 0
    output_tokens: int = 0
    calls: int = 0
    estimated: bool = False

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0 or self.calls < 0:
            raise ValueError("usage counts must be non-negative")

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(
            input_tokens=self.input_tokens + other.input_tokens,
            output_tokens=self.output_tokens + other.output_tokens,
            calls=self.calls + other.calls,
            estimated=self.estimated or other.estimated,
        )

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens


def estimate_tokens(text: str) -> int:
    """Whitespace-token fallback when the backend reports no usage."""
    return len(text.split())


@dataclass(frozen=True)
class BackendReply:
    text: str
    usage: Usage | None = None


class Backend(Protocol):
    model_id: str

    def complete(self, system: str | None, user: str) -> BackendReply: ...


class RateLimiter:
    """Minimum-interval limiter shared across worker threads."""

    def __init__(self, requests_per_second: float | None):
        self._interval = 1.0 / requests_per_second if requests_per_second else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if not self._interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if delay > 0:
            time.sleep(delay)


class HttpChatBackend:
    """Chat-completion JSON-over-HTTPS client.

    Credentials come from an environment variable only; config files never
    hold keys.  Transport errors and 5xx/429 responses retry with
    exponential backoff up to ``max_retries``.
    """

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        api_key_env: str = "CXMINE_API_KEY",
        max_retries: int = 2,
        requests_per_second: float | None = None,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.model_id = model_id
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self._limiter = RateLimiter(requests_per_second)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise BackendError(
                f"no API key in environment variable {self.api_key_env}"
            )
        return {"Authorization": f"Bearer {key}"}

    def complete(self, system: str | None, user: str) -> BackendReply:
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": user})
        payload = {"model": self.model_id, "messages": messages}
        delay = 1.0
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            self._limiter.wait()
            try:
                resp = self._client.post(
                    self.endpoint, json=payload, headers=self._headers()
                )
                if resp.status_code in (429,) or resp.status_code >= 500:
                    retry_after = resp.headers.get("Retry-After")
                    last_error = BackendError(f"HTTP {resp.status_code}")
                    sleep_for = float(retry_after) if retry_after else delay
                    if attempt < self.max_retries:
                        time.sleep(sleep_for)
                        delay *= 2
                        continue
                    break
                resp.raise_for_status()
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
                usage = None
                if "usage" in body:
                    usage = Usage(
                        input_tokens=int(body["usage"].get("prompt_tokens", 0)),
                        output_tokens=int(body["usage"].get("completion_tokens", 0)),
                        calls=1,
                    )
                return BackendReply(text=text, usage=usage)
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(delay)
                    delay *= 2
        raise BackendError(f"backend unreachable after retries: {last_error}")


class ScriptedBackend:
    """Mock driven by a reply function; deterministic and offline."""

    def __init__(
        self,
        reply_fn: Callable[[str | None, str], str],
        model_id: str = "mock",
        usage_fn: Callable[[str | None, str, str], Usage] | None = None,
    ):
        self._reply_fn = reply_fn
        self.model_id = model_id
        self._usage_fn = usage_fn

    def complete(self, system: str | None, user: str) -> BackendReply:
        text = self._reply_fn(system, user)
        usage = self._usage_fn(system, user, text) if self._usage_fn else None
        return BackendReply(text=text, usage=usage)


def transcript_key(system: str | None, user: str) -> str:
    h = hashlib.sha256()
    h.update((system or "").encode("utf-8"))
    h.update(b"\x00")
    h.update(user.encode("utf-8"))
    return h.hexdigest()


class RecordingBackend:
    """Wraps another backend and appends (request, reply) transcripts."""

    def __init__(self, inner: Backend, sink):
        self._inner = inner
        self._sink = sink
        self.model_id = inner.model_id

    def complete(self, system: str | None, user: str) -> BackendReply:
        reply = self._inner.complete(system, user)
        record = {
            "key": transcript_key(system, user),
            "system": system,
            "user": user,
            "reply": reply.text,
            "model_id": self.model_id,
        }
        if reply.usage is not None:
            record["usage"] = {
                "input_tokens": reply.usage.input_tokens,
                "output_tokens": reply.usage.output_tokens,
            }
        self._sink.write(json.dumps(record, ensure_ascii=False) + "\n")
        return reply


class ReplayBackend:
    """Replays persisted transcripts; raises on any unseen request."""

    def __init__(self, records: Iterable[dict], model_id: str | None = None):
        self._replies: dict[str, dict] = {}
        inferred = None
        for rec in records:
            key = rec.get("key") or transcript_key(rec.get("system"), rec["user"])
            self._replies[key] = rec
            inferred = rec.get("model_id", inferred)
        self.model_id = model_id or inferred or "replay"

    @classmethod
    def from_file(cls, path) -> "ReplayBackend":
        with open(path, encoding="utf-8") as f:
            return cls(json.loads(line) for line in f if line.strip())

    def complete(self, system: str | None, user: str) -> BackendReply:
        key = transcript_key(system, user)
        rec = self._replies.get(key)
        if rec is None:
            raise BackendError("no transcript recorded for this request")
        usage = None
        if "usage" in rec:
            usage = Usage(
                input_tokens=rec["usage"].get("input_tokens", 0),
                output_tokens=rec["usage"].get("output_tokens", 0),
                calls=1,
            )
        return BackendReply(text=rec["reply"], usage=usage)
