"""Chunking, embedding, and metadata-filtered top-k cosine retrieval.

The index is an exact exhaustive scan over the metadata-filtered subset:
at the few-hundred-chunk scale an ANN structure buys nothing and exactness
keeps retrieval oracle-checkable. The metadata filter (dimension, pole) is
applied before any similarity computation, never after.

Two embedding providers ship here: an HTTP provider speaking a plain
batch-in/batch-out contract, and a deterministic offline provider that
random-projects token-hash count vectors to 384 dimensions. The latter makes
every retrieval test and the full offline experiment grid reproducible
across machines.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
import urllib.error
import urllib.request
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from lexalign.factors import Pole
from lexalign.textprep import tokenize

log = logging.getLogger(__name__)

INDEX_FORMAT = "lexalign-index/1"
EXEMPLARS_FORMAT = "lexalign-exemplars/1"

DEFAULT_CHUNK_SIZE = 300
DEFAULT_CHUNK_OVERLAP = 50
DEFAULT_TOP_K = 3


class RetrievalError(Exception):
    pass


class EmbeddingError(Exception):
    pass


@dataclass(frozen=True)
class ExemplarText:
    """One pole exemplar: a top-scoring document serving as reference text."""

    doc_id: str
    dim: int  # 1-based dimension index
    pole: Pole
    rank: int  # 1 = strongest
    score: float
    text: str


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    dim: int
    pole: Pole
    text: str
    embedding: np.ndarray | None = None


@dataclass(frozen=True)
class Query:
    text: str
    dim: int
    pole: Pole
    embedding: np.ndarray


def chunk_spans(n_words: int, size: int, overlap: int) -> list[tuple[int, int]]:
    """Sliding word-window spans with stride size-overlap.

    The final short window is kept when it is at least a quarter of the
    window size or reaches words no earlier window covers, so the union of
    spans always covers the document exactly.
    """
    if overlap < 0 or size <= overlap:
        raise RetrievalError("need size > overlap >= 0")
    spans = []
    stride = size - overlap
    start = 0
    while start < n_words:
        end = min(start + size, n_words)
        length = end - start
        if length == size or start == 0 or length * 4 >= size or length > overlap:
            spans.append((start, end))
        if end >= n_words:
            break
        start += stride
    return spans


def chunk_documents(
    exemplars: Sequence[ExemplarText],
    size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> list[Chunk]:
    """Split each exemplar into word windows tagged with its (dim, pole)."""
    chunks = []
    for ex in exemplars:
        words = ex.text.split()
        for start, end in chunk_spans(len(words), size, overlap):
            chunks.append(
                Chunk(
                    chunk_id=f"{ex.doc_id}:d{ex.dim}{ex.pole.value}:{start}",
                    doc_id=ex.doc_id,
                    dim=ex.dim,
                    pole=ex.pole,
                    text=" ".join(words[start:end]),
                )
            )
    return chunks


class EmbeddingProvider(Protocol):
    name: str
    dim: int
    max_tokens: int | None

    def tokenize(self, text: str) -> list[str]: ...

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic random-projection embedding of token-hash counts.

    Each token maps to a fixed pseudo-random Gaussian direction derived from
    a SHA-256 of (seed, token); a text embeds as the L2-normalized
    count-weighted sum. Dimensionality mirrors the 384-d evaluation encoder.
    """

    name = "hash-projection-384"

    def __init__(self, dim: int = 384, seed: int = 0, max_tokens: int | None = 256):
        self.dim = dim
        self.seed = seed
        self.max_tokens = max_tokens
        self._cache: dict[str, np.ndarray] = {}

    def tokenize(self, text: str) -> list[str]:
        return tokenize(text)

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            vec = rng.standard_normal(self.dim)
            self._cache[token] = vec
        return vec

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        rows = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            counts = Counter(self.tokenize(text))
            if not counts:
                raise EmbeddingError("cannot embed a text with no tokens")
            for token, count in counts.items():
                rows[i] += count * self._token_vector(token)
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        if np.any(norms < 1e-12):
            raise EmbeddingError("degenerate zero-norm embedding")
        return rows / norms


Transport = Callable[[str, dict, dict, float], dict]


def _urllib_transport(url: str, payload: dict, headers: dict, timeout: float) -> dict:
    req = urllib.request.Request(
        url,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json", **headers},
        method="POST",
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


class HttpEmbedder:
    """Remote embedding endpoint: POST a text batch, get equal-length vectors.

    Request: {"texts": [...]}; response: {"vectors": [[...], ...]}. The auth
    token is read from the named environment variable. Failed calls retry
    with exponential backoff before the batch is reported as failed. Large
    inputs are split into batches sent with bounded parallelism (default 4
    in flight); results keep input order.
    """

    name = "http"

    def __init__(
        self,
        url: str,
        dim: int,
        auth_env: str | None = None,
        max_tokens: int | None = None,
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff: float = 1.0,
        batch_size: int = 64,
        max_in_flight: int = 4,
        transport: Transport | None = None,
    ):
        self.url = url
        self.dim = dim
        self.auth_env = auth_env
        self.max_tokens = max_tokens
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self._transport = transport or _urllib_transport

    def tokenize(self, text: str) -> list[str]:
        return tokenize(text)

    def _headers(self) -> dict:
        if not self.auth_env:
            return {}
        token = os.environ.get(self.auth_env)
        if not token:
            raise EmbeddingError(f"auth environment variable {self.auth_env} unset")
        return {"Authorization": f"Bearer {token}"}

    def _encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        payload = {"texts": list(texts)}
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self._transport(
                    self.url, payload, self._headers(), self.timeout
                )
                break
            except (urllib.error.URLError, OSError, ValueError) as exc:
                log.warning(
                    "embedding call failed (attempt %d/%d): %s",
                    attempt + 1,
                    self.max_attempts,
                    exc,
                )
                last = exc
        else:
            raise EmbeddingError(f"embedding batch failed after retries: {last}")
        vectors = np.asarray(response.get("vectors", []), dtype=float)
        if vectors.shape != (len(texts), self.dim):
            raise EmbeddingError(
                f"endpoint returned shape {vectors.shape}, "
                f"expected {(len(texts), self.dim)}"
            )
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if np.any(norms < 1e-12):
            raise EmbeddingError("endpoint returned a zero vector")
        return vectors / norms

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if len(texts) <= self.batch_size:
            return self._encode_batch(texts)
        batches = [
            texts[i : i + self.batch_size]
            for i in range(0, len(texts), self.batch_size)
        ]
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            parts = list(pool.map(self._encode_batch, batches))
        return np.vstack(parts)


@dataclass
class ChunkIndex:
    """Immutable-after-build chunk store with unit-norm embedding rows."""

    chunks: list[Chunk]
    vectors: np.ndarray
    provider: str = ""

    def __len__(self) -> int:
        return len(self.chunks)


def build_index(chunks: Sequence[Chunk], embedder: EmbeddingProvider) -> ChunkIndex:
    if not chunks:
        raise RetrievalError("no chunks to index")
    vectors = embedder.encode([c.text for c in chunks])
    stored = [replace(c, embedding=vectors[i]) for i, c in enumerate(chunks)]
    return ChunkIndex(chunks=stored, vectors=vectors, provider=embedder.name)


def make_query(
    text: str, dim: int, pole: Pole, embedder: EmbeddingProvider
) -> Query:
    return Query(text=text, dim=dim, pole=pole, embedding=embedder.encode([text])[0])


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    score: float


def retrieve(query: Query, index: ChunkIndex, k: int = DEFAULT_TOP_K) -> list[ScoredChunk]:
    """Filter to the query's (dim, pole), then exact top-k by cosine.

    Ties break by chunk id. An empty filtered set is an error: the caller
    decides whether to fall back to a no-context prompt.
    """
    if k < 1:
        raise RetrievalError("k must be >= 1")
    rows = [
        i
        for i, c in enumerate(index.chunks)
        if c.dim == query.dim and c.pole == query.pole
    ]
    if not rows:
        raise RetrievalError(
            f"no context available for dimension {query.dim} "
            f"pole {query.pole.value}"
        )
    sims = index.vectors[rows] @ query.embedding
    ranked = sorted(
        zip(rows, sims), key=lambda item: (-item[1], index.chunks[item[0]].chunk_id)
    )
    return [ScoredChunk(chunk=index.chunks[i], score=float(s)) for i, s in ranked[:k]]


def save_exemplars(exemplars: Sequence[ExemplarText], path: str | Path) -> None:
    payload = {
        "format": EXEMPLARS_FORMAT,
        "exemplars": [
            {
                "doc_id": e.doc_id,
                "dim": e.dim,
                "pole": e.pole.value,
                "rank": e.rank,
                "score": e.score,
                "text": e.text,
            }
            for e in exemplars
        ],
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_exemplars(path: str | Path) -> list[ExemplarText]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != EXEMPLARS_FORMAT:
        raise RetrievalError(f"unsupported exemplars format {payload.get('format')!r}")
    return [
        ExemplarText(
            doc_id=e["doc_id"],
            dim=e["dim"],
            pole=Pole(e["pole"]),
            rank=e["rank"],
            score=e["score"],
            text=e["text"],
        )
        for e in payload["exemplars"]
    ]


def save_index(index: ChunkIndex, path: str | Path) -> None:
    payload = {
        "format": INDEX_FORMAT,
        "provider": index.provider,
        "dim": int(index.vectors.shape[1]),
        "chunks": [
            {
                "chunk_id": c.chunk_id,
                "doc_id": c.doc_id,
                "dim": c.dim,
                "pole": c.pole.value,
                "text": c.text,
                "embedding": index.vectors[i].tolist(),
            }
            for i, c in enumerate(index.chunks)
        ],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_index(path: str | Path) -> ChunkIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != INDEX_FORMAT:
        raise RetrievalError(f"unsupported index format {payload.get('format')!r}")
    chunks = []
    vectors = []
    for c in payload["chunks"]:
        vec = np.asarray(c["embedding"], dtype=float)
        if abs(np.linalg.norm(vec) - 1.0) > 1e-6:
            raise RetrievalError(f"chunk {c['chunk_id']} embedding is not unit norm")
        chunks.append(
            Chunk(
                chunk_id=c["chunk_id"],
                doc_id=c["doc_id"],
                dim=c["dim"],
                pole=Pole(c["pole"]),
                text=c["text"],
                embedding=vec,
            )
        )
        vectors.append(vec)
    return ChunkIndex(
        chunks=chunks, vectors=np.vstack(vectors), provider=payload.get("provider", "")
    )
