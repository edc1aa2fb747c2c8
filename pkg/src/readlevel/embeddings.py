"""Per-token embedding providers for the semantic-similarity metric.

The metric itself never loads a model; embeddings arrive through one of
these providers:

* :class:`LexiconEmbeddings` reads static vectors from a text file
  (``word v1 v2 ... vd`` per line, GloVe style).  Tokens missing from the
  file get a deterministic pseudo-random unit vector derived from a hash
  of the token, so the provider works with no file at all and the whole
  evaluation stays offline and reproducible.
* :class:`HttpEmbeddings` talks to an embedding sidecar over HTTP/JSON
  (POST /embed with a list of texts; the response carries the service's
  own tokens plus one vector per token, which are consumed verbatim).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from . import textcore


class EmbeddingServiceError(RuntimeError):
    """The embedding sidecar was unreachable or answered with an error."""


@dataclass(frozen=True)
class TokenEmbeddings:
    tokens: tuple[str, ...]
    vectors: np.ndarray  # shape (len(tokens), dim)


def hashed_unit_vector(token: str, dim: int) -> np.ndarray:
    """Deterministic unit vector for an out-of-lexicon token.

    Components are derived from SHA-256 of (token, index), so the result
    is stable across processes, platforms and library versions.
    """
    values = np.empty(dim)
    for k in range(dim):
        digest = hashlib.sha256(f"{token}\x00{k}".encode("utf-8")).digest()
        values[k] = int.from_bytes(digest[:8], "big") / 2**63 - 1.0
    norm = np.linalg.norm(values)
    if norm == 0.0:  # astronomically unlikely; keep the contract anyway
        values[0] = 1.0
        norm = 1.0
    return values / norm


class LexiconEmbeddings:
    """Static per-token vectors from a file, hashed fallback for the rest."""

    def __init__(self, path: str | Path | None = None, dim: int = 64):
        self.vectors: dict[str, np.ndarray] = {}
        self.dim = dim
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    parts = line.split()
                    if not parts:
                        continue
                    word, *rest = parts
                    try:
                        vec = np.array([float(x) for x in rest])
                    except ValueError as exc:
                        raise ValueError(f"{path}:{lineno}: bad vector") from exc
                    self.vectors[word.lower()] = vec
            if self.vectors:
                dims = {v.shape[0] for v in self.vectors.values()}
                if len(dims) != 1:
                    raise ValueError(f"{path}: mixed vector dimensions {sorted(dims)}")
                self.dim = dims.pop()
        self._fallback_cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        known = self.vectors.get(token)
        if known is not None:
            return known
        cached = self._fallback_cache.get(token)
        if cached is None:
            cached = hashed_unit_vector(token, self.dim)
            self._fallback_cache[token] = cached
        return cached

    def embed(self, text: str) -> TokenEmbeddings:
        tokens = tuple(t.casefold() for t in textcore.tokenize(text))
        if not tokens:
            return TokenEmbeddings(tokens=(), vectors=np.zeros((0, self.dim)))
        return TokenEmbeddings(tokens=tokens, vectors=np.stack([self._vector(t) for t in tokens]))


class HttpEmbeddings:
    """Client for the embedding sidecar; see the service's /embed contract."""

    def __init__(self, url: str, model: str | None = None, timeout: float = 60.0):
        self.url = url.rstrip("/")
        self.model = model
        self.timeout = timeout

    def embed_batch(self, texts: list[str]) -> list[TokenEmbeddings]:
        body: dict = {"texts": texts}
        if self.model:
            body["model"] = self.model
        try:
            resp = requests.post(f"{self.url}/embed", json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise EmbeddingServiceError(f"embed request failed: {exc}") from exc
        if resp.status_code != 200:
            raise EmbeddingServiceError(f"embed service returned {resp.status_code}: {resp.text[:200]}")
        try:
            results = resp.json()["results"]
            out = [
                TokenEmbeddings(tokens=tuple(r["tokens"]), vectors=np.asarray(r["vectors"], dtype=float))
                for r in results
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingServiceError(f"malformed embed response: {exc}") from exc
        if len(out) != len(texts):
            raise EmbeddingServiceError("embed response length mismatch")
        return out

    def embed(self, text: str) -> TokenEmbeddings:
        return self.embed_batch([text])[0]

    def health(self) -> dict:
        try:
            resp = requests.get(f"{self.url}/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise EmbeddingServiceError(f"health request failed: {exc}") from exc
        if resp.status_code != 200:
            raise EmbeddingServiceError(f"service not ready: {resp.status_code}")
        return resp.json()
