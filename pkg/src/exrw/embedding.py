"""Sentence vectors behind a uniform provider contract.

Three providers share one interface: a precomputed JSONL cache, a remote
HTTP sidecar, and a deterministic offline fallback (hashed bag-of-words).
All vectors are L2-normalized on ingest so cosine reduces to a dot
product. Vector math used across the engine lives here too.
"""
from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from .corpus import content_hash, split_sentences

# A sentence vector is a 1-D float64 numpy array of the provider's dim.
SentenceVector = np.ndarray

_TOKEN_RE = re.compile(r"\S+")

DEFAULT_FALLBACK_DIM = 64
DEFAULT_TIMEOUT_MS = 10_000
_RETRY_ATTEMPTS = 3
_RETRY_BACKOFF_S = 0.2


class EmbeddingError(RuntimeError):
    """Provider failure: cache miss, transport error, or bad response."""


class EmbeddingProvider(Protocol):
    kind: str
    dim: int

    def embed(self, texts: Sequence[str]) -> list[SentenceVector]: ...


@dataclass
class EmbeddingProviderConfig:
    kind: str = "fallback"  # one of {cache, remote, fallback}
    dim: int = DEFAULT_FALLBACK_DIM
    cache_path: str | None = None
    endpoint_url: str | None = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    return v / norm if norm > 0.0 else v


def cosine(u: SentenceVector, v: SentenceVector) -> float:
    """Standard cosine similarity; all-zero vectors score 0 by convention."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dim mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def mean_pool(vectors: Sequence[SentenceVector]) -> SentenceVector:
    """Coordinate-wise mean re-normalized to unit length."""
    if len(vectors) == 0:
        raise ValueError("cannot pool zero vectors")
    stacked = np.stack([np.asarray(v, dtype=float) for v in vectors])
    return _unit(stacked.mean(axis=0))


def _token_hash(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class FallbackEmbeddingProvider:
    """Deterministic hashed bag-of-words embedder.

    Lowercased whitespace tokens are hashed to one of `dim` buckets with a
    signed (+/-1) stable hash, accumulated, and L2-normalized. The vector
    is a pure function of the token multiset of the text.
    """

    kind = "fallback"

    def __init__(self, dim: int = DEFAULT_FALLBACK_DIM):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> list[SentenceVector]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> SentenceVector:
        v = np.zeros(self.dim, dtype=float)
        tokens = _TOKEN_RE.findall(text.lower())
        for token in tokens:
            h = _token_hash(token)
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            v[h % self.dim] += sign
        if not np.any(v):
            # Signed buckets cancelled (or no tokens): fall back to a unit
            # basis vector derived from the sorted token multiset so the
            # multiset-purity and unit-norm contracts both hold.
            h = _token_hash("\x00".join(sorted(tokens)))
            v[h % self.dim] = 1.0
        return _unit(v)


class CacheEmbeddingProvider:
    """Immutable content_hash -> vector lookup loaded from a JSONL file.

    Misses are hard errors listing the missing hash; there is no silent
    fallback.
    """

    kind = "cache"

    def __init__(self, dim: int, vectors: dict[str, SentenceVector]):
        self.dim = dim
        self._vectors = {k: _unit(np.asarray(v, dtype=float)) for k, v in vectors.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "CacheEmbeddingProvider":
        with open(path, encoding="utf-8") as fh:
            header_line = fh.readline()
            try:
                header = json.loads(header_line)
            except json.JSONDecodeError as exc:
                raise EmbeddingError(f"invalid cache header in {path}: {exc.msg}") from exc
            if header.get("format") != "embcache" or "dim" not in header:
                raise EmbeddingError(f"invalid cache header in {path}")
            dim = int(header["dim"])
            vectors: dict[str, SentenceVector] = {}
            for lineno, line in enumerate(fh, start=2):
                if not line.strip():
                    continue
                row = json.loads(line)
                vec = np.asarray(row["vector"], dtype=float)
                if vec.shape != (dim,):
                    raise EmbeddingError(
                        f"cache row at line {lineno} has dim {vec.shape[0]}, expected {dim}"
                    )
                vectors[row["key"]] = vec
        return cls(dim, vectors)

    @classmethod
    def from_texts(
        cls, texts: Sequence[str], vectors: Sequence[SentenceVector]
    ) -> "CacheEmbeddingProvider":
        """Build an in-memory cache keyed by the content hash of each text."""
        if len(texts) != len(vectors):
            raise ValueError("texts and vectors must be the same length")
        dim = int(np.asarray(vectors[0]).shape[0])
        return cls(dim, {content_hash(t): np.asarray(v, dtype=float) for t, v in zip(texts, vectors)})

    def embed(self, texts: Sequence[str]) -> list[SentenceVector]:
        out = []
        missing = []
        for text in texts:
            key = content_hash(text)
            vec = self._vectors.get(key)
            if vec is None:
                missing.append(key)
            else:
                out.append(vec)
        if missing:
            raise EmbeddingError(f"cache miss for hashes: {', '.join(missing)}")
        return out


def write_cache_file(path: str | Path, dim: int, entries: dict[str, Sequence[float]]) -> None:
    """Write an embedding cache file: header line, then one row per key."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": "embcache", "dim": dim}) + "\n")
        for key in sorted(entries):
            vec = [float(x) for x in entries[key]]
            fh.write(json.dumps({"key": key, "vector": vec}) + "\n")


class RemoteEmbeddingProvider:
    """Client for the sidecar /embed endpoint.

    Retries transport failures and non-200 responses a bounded number of
    times with exponential backoff; the vector dim is taken from the first
    successful response and pinned for the provider's lifetime.
    """

    kind = "remote"

    def __init__(
        self,
        endpoint_url: str,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        attempts: int = _RETRY_ATTEMPTS,
        backoff_s: float = _RETRY_BACKOFF_S,
    ):
        self.endpoint_url = endpoint_url.rstrip("/")
        self.timeout_s = timeout_ms / 1000.0
        self.attempts = attempts
        self.backoff_s = backoff_s
        self.dim = 0  # pinned after the first successful call

    def embed(self, texts: Sequence[str]) -> list[SentenceVector]:
        payload = {"texts": list(texts)}
        body = _post_with_retries(
            f"{self.endpoint_url}/embed",
            payload,
            timeout_s=self.timeout_s,
            attempts=self.attempts,
            backoff_s=self.backoff_s,
        )
        try:
            dim = int(body["dim"])
            rows = body["vectors"]
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError(f"malformed /embed response: {body!r}") from exc
        if len(rows) != len(texts):
            raise EmbeddingError(f"/embed returned {len(rows)} vectors for {len(texts)} texts")
        if self.dim == 0:
            self.dim = dim
        elif dim != self.dim:
            raise EmbeddingError(f"/embed dim changed from {self.dim} to {dim}")
        return [_unit(np.asarray(row, dtype=float)) for row in rows]


def _post_with_retries(
    url: str,
    payload: dict,
    timeout_s: float,
    attempts: int,
    backoff_s: float,
) -> dict:
    last_error: str = ""
    for attempt in range(attempts):
        if attempt > 0:
            time.sleep(backoff_s * (2 ** (attempt - 1)))
        try:
            resp = requests.post(url, json=payload, timeout=timeout_s)
        except requests.RequestException as exc:
            last_error = f"transport error: {exc}"
            continue
        if resp.status_code == 200:
            try:
                return resp.json()
            except ValueError:
                last_error = "non-JSON 200 response"
                continue
        last_error = f"status {resp.status_code}: {resp.text[:200]}"
    raise EmbeddingError(f"POST {url} failed after {attempts} attempts ({last_error})")


def make_provider(config: EmbeddingProviderConfig) -> EmbeddingProvider:
    if config.kind == "fallback":
        return FallbackEmbeddingProvider(dim=config.dim)
    if config.kind == "cache":
        if not config.cache_path:
            raise ValueError("cache provider requires cache_path")
        return CacheEmbeddingProvider.from_file(config.cache_path)
    if config.kind == "remote":
        if not config.endpoint_url:
            raise ValueError("remote provider requires endpoint_url")
        return RemoteEmbeddingProvider(config.endpoint_url, timeout_ms=config.timeout_ms)
    raise ValueError(f"unknown provider kind {config.kind!r}")


def embed_text(provider: EmbeddingProvider, text: str) -> SentenceVector:
    """Embed a possibly multi-sentence text.

    The remote provider encodes the full text in one call; cache and
    fallback providers mean-pool per-sentence vectors.
    """
    if provider.kind == "remote":
        return provider.embed([text])[0]
    sentences = split_sentences(text)
    if not sentences:
        return np.zeros(provider.dim, dtype=float)
    return mean_pool(provider.embed(sentences))
