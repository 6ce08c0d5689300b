"""Process memory: story embeddings, a flat vector index, and causal top-k retrieval.

The index is an exhaustive-scan store. Corpora are a few thousand stories at
most (one per day per granularity), so exact scoring is cheap and keeps
retrieval trivially auditable. Retrieval never returns a story dated on or
after the query day: downstream forecasting depends on that cutoff.
"""

from __future__ import annotations

import json
import logging
import threading
import zlib
from dataclasses import dataclass, field
from datetime import date as Date, timedelta
from typing import IO, Iterable, Sequence

import numpy as np

from .narrative import Story, story_from_dict, story_numbers, story_to_dict

logger = logging.getLogger(__name__)

TRIGRAM_BUCKETS = 64
NUMERIC_SLOTS = 8


class EmbeddingError(Exception):
    """Embedding provider failed (transport, response shape, or bad input)."""


def cosine(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity between two nonzero vectors of equal dimension."""
    a = np.asarray(u, dtype=float)
    b = np.asarray(v, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero-norm vector")
    return float(np.dot(a, b) / (na * nb))


def _squash(value: float) -> float:
    # Maps any real to (0, 1); 0.0 stays distinguishable from "no value" slots.
    return (1.0 + value / (1.0 + abs(value))) / 2.0


class DeterministicEmbedder:
    """Offline embedding provider with stable output across runs and platforms.

    Concatenates hashed character-trigram term frequencies (crc32 into a fixed
    number of buckets; crc32 is stable, unlike Python's salted hash()) with the
    first few numbers appearing in the text squashed into (0, 1). The trigram
    block is unit-normalized before concatenation so long stories do not drown
    the numeric features, then the whole vector is normalized again.
    """

    def __init__(self, buckets: int = TRIGRAM_BUCKETS, numeric_slots: int = NUMERIC_SLOTS):
        if buckets < 1 or numeric_slots < 0:
            raise ValueError("buckets must be >= 1 and numeric_slots >= 0")
        self.buckets = buckets
        self.numeric_slots = numeric_slots

    @property
    def dim(self) -> int:
        return self.buckets + self.numeric_slots

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise EmbeddingError("cannot embed empty text")
        counts = np.zeros(self.buckets, dtype=float)
        padded = f"##{text}##"  # boundary padding guarantees at least one trigram
        for i in range(len(padded) - 2):
            bucket = zlib.crc32(padded[i : i + 3].encode("utf-8")) % self.buckets
            counts[bucket] += 1.0
        counts /= np.linalg.norm(counts)
        numeric = np.zeros(self.numeric_slots, dtype=float)
        for slot, value in zip(range(self.numeric_slots), story_numbers(text)):
            numeric[slot] = _squash(value)
        vec = np.concatenate([counts, numeric])
        return vec / np.linalg.norm(vec)

    def embed_many(self, texts: Iterable[str]) -> np.ndarray:
        rows = [self.embed(t) for t in texts]
        return np.stack(rows) if rows else np.empty((0, self.dim))


class RemoteEmbedder:
    """Embedding client for an HTTP endpoint taking {model, input} and returning vectors."""

    def __init__(self, endpoint: str, model: str = "bge-base-en-v1.5",
                 timeout: float = 30.0, session=None):
        import requests

        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self._session = session if session is not None else requests.Session()
        self._dim: int | None = None

    @property
    def dim(self) -> int:
        if self._dim is None:
            raise EmbeddingError("remote dimension unknown before the first embed call")
        return self._dim

    def embed_many(self, texts: Iterable[str]) -> np.ndarray:
        batch = list(texts)
        if not batch:
            return np.empty((0, self._dim or 0))
        if any(not t for t in batch):
            raise EmbeddingError("cannot embed empty text")
        try:
            resp = self._session.post(
                self.endpoint,
                json={"model": self.model, "input": batch},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
            rows = [np.asarray(item["embedding"], dtype=float) for item in payload["data"]]
        except Exception as exc:
            raise EmbeddingError(f"remote embedding failed: {exc}") from exc
        if len(rows) != len(batch):
            raise EmbeddingError(f"expected {len(batch)} embeddings, got {len(rows)}")
        matrix = np.stack(rows)
        if not np.isfinite(matrix).all():
            raise EmbeddingError("remote embedding contains non-finite values")
        if self._dim is None:
            self._dim = matrix.shape[1]
        elif matrix.shape[1] != self._dim:
            raise EmbeddingError(f"remote dim changed: {matrix.shape[1]} != {self._dim}")
        return matrix

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


@dataclass(frozen=True)
class MemoryDocument:
    """One contextual story with its embedding, keyed by a stable doc_id."""

    story: Story
    embedding: np.ndarray = field(compare=False, repr=False)
    doc_id: int = 0

    def __post_init__(self):
        if self.story.kind != "contextual":
            raise ValueError("memory stores contextual stories only")
        vec = np.asarray(self.embedding, dtype=float)
        if vec.ndim != 1:
            raise ValueError("embedding must be one-dimensional")
        if not np.isfinite(vec).all():
            raise ValueError("embedding entries must be finite")
        if float(np.linalg.norm(vec)) == 0.0:
            raise ValueError("embedding must have nonzero norm")
        object.__setattr__(self, "embedding", vec)


@dataclass(frozen=True)
class RetrievalResult:
    document: MemoryDocument
    similarity: float


@dataclass(frozen=True)
class RetentionPolicy:
    """What stays eligible at retrieval time. Defaults keep everything."""

    max_age_days: int | None = None
    min_similarity: float | None = None

    def __post_init__(self):
        if self.max_age_days is not None and self.max_age_days < 1:
            raise ValueError("max_age_days must be >= 1")


class StoryIndex:
    """Flat cosine index over contextual stories with a strict as-of cutoff.

    One writer or many readers at a time; the score arrays are rebuilt lazily
    under a lock after mutations. Ties on similarity prefer the more recent
    story date, then the smaller doc_id.
    """

    def __init__(self, provider=None, retention: RetentionPolicy | None = None):
        self.provider = provider
        self.retention = retention if retention is not None else RetentionPolicy()
        self._docs: dict[int, MemoryDocument] = {}
        self._dim: int | None = None
        self._lock = threading.Lock()
        self._stale = True
        self._matrix = np.empty((0, 0))
        self._norms = np.empty(0)
        self._dates = np.empty(0, dtype=np.int64)
        self._ids = np.empty(0, dtype=np.int64)

    @property
    def dim(self) -> int | None:
        return self._dim

    def __len__(self) -> int:
        return len(self._docs)

    def add(self, doc: MemoryDocument) -> None:
        """Insert a document; a duplicate doc_id replaces the prior entry."""
        if self._dim is None:
            self._dim = doc.embedding.shape[0]
        elif doc.embedding.shape[0] != self._dim:
            raise ValueError(
                f"embedding dim {doc.embedding.shape[0]} does not match index dim {self._dim}"
            )
        with self._lock:
            self._docs[doc.doc_id] = doc
            self._stale = True

    def add_story(self, story: Story, doc_id: int | None = None) -> MemoryDocument:
        """Embed a contextual story with the index's provider and insert it."""
        if self.provider is None:
            raise ValueError("index has no embedding provider; use add() with a document")
        if doc_id is None:
            doc_id = max(self._docs, default=-1) + 1
        doc = MemoryDocument(story=story, embedding=self.provider.embed(story.text), doc_id=doc_id)
        self.add(doc)
        return doc

    def documents(self) -> list[MemoryDocument]:
        return [self._docs[i] for i in sorted(self._docs)]

    def _rebuild(self) -> None:
        with self._lock:
            if not self._stale:
                return
            ids = sorted(self._docs)
            if ids:
                self._matrix = np.stack([self._docs[i].embedding for i in ids])
                self._norms = np.linalg.norm(self._matrix, axis=1)
                self._dates = np.array(
                    [self._docs[i].story.date.toordinal() for i in ids], dtype=np.int64
                )
                self._ids = np.array(ids, dtype=np.int64)
            else:
                self._matrix = np.empty((0, self._dim or 0))
                self._norms = np.empty(0)
                self._dates = np.empty(0, dtype=np.int64)
                self._ids = np.empty(0, dtype=np.int64)
            self._stale = False

    def retrieve(self, query: Story | str | np.ndarray, as_of: Date, k: int = 5) -> list[RetrievalResult]:
        """Top-k most similar documents dated strictly before as_of."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if isinstance(query, np.ndarray):
            qvec = np.asarray(query, dtype=float)
        else:
            if self.provider is None:
                raise ValueError("index has no embedding provider; pass a query vector")
            text = query.text if isinstance(query, Story) else query
            qvec = self.provider.embed(text)
        qnorm = float(np.linalg.norm(qvec))
        if qnorm == 0.0:
            raise ValueError("cosine undefined for zero-norm query")
        if not self._docs:
            return []
        if self._dim is not None and qvec.shape[0] != self._dim:
            raise ValueError(f"query dim {qvec.shape[0]} does not match index dim {self._dim}")
        self._rebuild()

        cutoff = as_of.toordinal()
        mask = self._dates < cutoff
        if self.retention.max_age_days is not None:
            oldest = (as_of - timedelta(days=self.retention.max_age_days)).toordinal()
            mask &= self._dates >= oldest
        if not mask.any():
            return []
        # einsum, not BLAS matmul: matmul accumulates differently per row
        # position, so equal embeddings would not score bit-identically and
        # the tie rule below would never engage.
        sims = np.einsum("ij,j->i", self._matrix[mask], qvec) / (self._norms[mask] * qnorm)
        dates = self._dates[mask]
        ids = self._ids[mask]
        if self.retention.min_similarity is not None:
            keep = sims >= self.retention.min_similarity
            sims, dates, ids = sims[keep], dates[keep], ids[keep]
        # lexsort uses the last key as primary: similarity desc, then date desc, then id asc.
        order = np.lexsort((ids, -dates, -sims))[:k]
        return [
            RetrievalResult(document=self._docs[int(ids[i])], similarity=float(sims[i]))
            for i in order
        ]


def save_index(index: StoryIndex, fp: IO[str]) -> int:
    """Write the index as JSON lines, one document per line, doc_id ascending."""
    count = 0
    for doc in index.documents():
        record = story_to_dict(doc.story)
        record["doc_id"] = doc.doc_id
        record["embedding"] = [float(x) for x in doc.embedding]
        del record["kind"]  # snapshots hold contextual stories only
        fp.write(json.dumps(record, sort_keys=True) + "\n")
        count += 1
    return count


def load_index(fp: IO[str], provider=None, retention: RetentionPolicy | None = None) -> StoryIndex:
    """Rebuild an index from a JSON-lines snapshot written by :func:`save_index`."""
    index = StoryIndex(provider=provider, retention=retention)
    for line in fp:
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        embedding = np.asarray(record.pop("embedding"), dtype=float)
        doc_id = int(record.pop("doc_id"))
        record["kind"] = "contextual"
        story = story_from_dict(record)
        index.add(MemoryDocument(story=story, embedding=embedding, doc_id=doc_id))
    return index
