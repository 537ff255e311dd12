"""Rewriter contract: identity join for deterministic offline runs, and a
remote client for any seq2seq service that accepts the "re-write" prompt.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import requests

DEFAULT_PROMPT_TAG = "re-write"
DEFAULT_TIMEOUT_MS = 30_000
_RETRY_ATTEMPTS = 3
_RETRY_BACKOFF_S = 0.2
_MAX_IN_FLIGHT = 4


class RewriteError(RuntimeError):
    """Remote rewrite failure after bounded retries, or an empty result."""


@dataclass
class RewriteRequest:
    sentences: list[str]
    prompt_tag: str = DEFAULT_PROMPT_TAG

    def __post_init__(self):
        if not self.sentences:
            raise ValueError("rewrite request needs at least one sentence")
        if any(not s.strip() for s in self.sentences):
            raise ValueError("rewrite request sentences must be nonempty")


@dataclass
class RewriteResult:
    text: str
    source: str  # {identity, remote}
    latency_ms: int


@dataclass
class RewriterConfig:
    kind: str = "identity"  # one of {identity, remote}
    endpoint_url: str | None = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_in_flight: int = _MAX_IN_FLIGHT


def rewrite_identity(req: RewriteRequest) -> RewriteResult:
    """Join the extracted sentences with single spaces, unchanged and in order."""
    return RewriteResult(text=" ".join(req.sentences), source="identity", latency_ms=0)


class RemoteRewriter:
    """Client for the sidecar /rewrite endpoint.

    Transport errors are retried with exponential backoff; concurrent
    requests are capped by a semaphore.
    """

    kind = "remote"

    def __init__(
        self,
        endpoint_url: str,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        attempts: int = _RETRY_ATTEMPTS,
        backoff_s: float = _RETRY_BACKOFF_S,
        max_in_flight: int = _MAX_IN_FLIGHT,
    ):
        self.endpoint_url = endpoint_url.rstrip("/")
        self.timeout_s = timeout_ms / 1000.0
        self.attempts = attempts
        self.backoff_s = backoff_s
        self._gate = threading.Semaphore(max_in_flight)

    def rewrite(self, req: RewriteRequest) -> RewriteResult:
        started = time.monotonic()
        payload = {"prompt": req.prompt_tag, "sentences": list(req.sentences)}
        url = f"{self.endpoint_url}/rewrite"
        last_error = ""
        with self._gate:
            for attempt in range(self.attempts):
                if attempt > 0:
                    time.sleep(self.backoff_s * (2 ** (attempt - 1)))
                try:
                    resp = requests.post(url, json=payload, timeout=self.timeout_s)
                except requests.RequestException as exc:
                    last_error = f"transport error: {exc}"
                    continue
                if resp.status_code != 200:
                    last_error = f"status {resp.status_code}: {resp.text[:200]}"
                    continue
                try:
                    body = resp.json()
                except ValueError:
                    last_error = "non-JSON 200 response"
                    continue
                text = body.get("text", "")
                if not text:
                    raise RewriteError("empty rewrite")
                latency_ms = int((time.monotonic() - started) * 1000)
                return RewriteResult(text=text, source="remote", latency_ms=latency_ms)
        raise RewriteError(f"POST {url} failed after {self.attempts} attempts ({last_error})")


class IdentityRewriter:
    """Deterministic stand-in rewriter satisfying the remote contract."""

    kind = "identity"

    def rewrite(self, req: RewriteRequest) -> RewriteResult:
        return rewrite_identity(req)


def rewrite_remote(req: RewriteRequest, config: RewriterConfig) -> RewriteResult:
    if not config.endpoint_url:
        raise ValueError("remote rewriter requires endpoint_url")
    client = RemoteRewriter(
        config.endpoint_url,
        timeout_ms=config.timeout_ms,
        max_in_flight=config.max_in_flight,
    )
    return client.rewrite(req)


def make_rewriter(config: RewriterConfig):
    if config.kind == "identity":
        return IdentityRewriter()
    if config.kind == "remote":
        if not config.endpoint_url:
            raise ValueError("remote rewriter requires endpoint_url")
        return RemoteRewriter(
            config.endpoint_url,
            timeout_ms=config.timeout_ms,
            max_in_flight=config.max_in_flight,
        )
    raise ValueError(f"unknown rewriter kind {config.kind!r}")
