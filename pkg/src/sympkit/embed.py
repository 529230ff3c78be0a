"""Sentence and sub-symptom embeddings plus the max-similarity relevance score.

Embeddings are dense L2-normalized vectors keyed by string id. They can
come from a precomputed TSV file (an external encoder's output) or from
the built-in deterministic hashing embedder used for tests and fixtures.
A sentence's relevance to a symptom is its maximum cosine similarity
against any of the symptom's sub-symptom vectors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import SchemaError
from .kg import KnowledgeGraph, Symptom

NORM_TOLERANCE = 1e-6


def sub_symptom_key(symptom_id: str, index: int) -> str:
    """Store id of a symptom's index-th sub-symptom description."""
    return f"{symptom_id}#{index}"


@dataclass(frozen=True)
class RelevanceScore:
    symptom_id: str
    score: float


@dataclass
class EmbeddingStore:
    """Id-indexed unit vectors of a single shared dimensionality."""

    dim: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, entry_id: str, vector: np.ndarray) -> None:
        if entry_id in self.entries:
            raise SchemaError(f"duplicate embedding id {entry_id!r}")
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise SchemaError(
                f"embedding {entry_id!r} has dimension {vec.shape[0] if vec.ndim == 1 else vec.shape},"
                f" store expects {self.dim}"
            )
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise SchemaError(f"embedding {entry_id!r} is a zero vector")
        if abs(norm - 1.0) > NORM_TOLERANCE:
            vec = vec / norm
        self.entries[entry_id] = vec

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, entry_id: str) -> np.ndarray:
        try:
            return self.entries[entry_id]
        except KeyError:
            raise KeyError(f"no embedding stored for id {entry_id!r}") from None


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Load a TSV embedding file (id, then dim float columns).

    An optional first line ``#dim=<n>`` pins the dimensionality;
    otherwise the first data row does. Vectors off unit norm by more
    than 1e-6 are renormalized, zero vectors are rejected.
    """
    store: EmbeddingStore | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("#dim=") and store is None:
                    store = EmbeddingStore(dim=int(line[len("#dim="):]))
                continue
            parts = line.split("\t")
            entry_id = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: bad float in row {entry_id!r}: {exc}") from exc
            if store is None:
                store = EmbeddingStore(dim=len(vec))
            if len(vec) != store.dim:
                raise SchemaError(
                    f"{path}:{lineno}: row {entry_id!r} has dimension {len(vec)}, expected {store.dim}"
                )
            store.add(entry_id, vec)
    if store is None:
        raise SchemaError(f"embedding file {path} holds no rows")
    return store


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"#dim={store.dim}\n")
        for entry_id in sorted(store.entries):
            cols = "\t".join(repr(float(x)) for x in store.entries[entry_id])
            handle.write(f"{entry_id}\t{cols}\n")


def _gram_hash(gram: str, key: bytes) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def hash_embed(text: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic unit vector from signed hashing of char 3-5-grams.

    Each character n-gram (n in 3..5) is hashed into one of ``dim``
    buckets with a sign bit; the accumulated vector is L2-normalized.
    Texts shorter than 3 characters contribute themselves as a single
    gram, and empty text maps to the first basis vector.
    """
    if dim < 8:
        raise ValueError(f"hash_embed needs dim >= 8, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    if text:
        key = hashlib.blake2b(str(seed).encode("utf-8"), digest_size=16).digest()
        grams: list[str] = []
        for n in (3, 4, 5):
            grams.extend(text[i : i + n] for i in range(len(text) - n + 1))
        if not grams:
            grams = [text]
        for gram in grams:
            h = _gram_hash(gram, key)
            sign = 1.0 if h & (1 << 63) else -1.0
            vec[h % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of two unit vectors of equal dimension."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(np.dot(u, v))


def symptom_relevance(
    sentence_vec: np.ndarray, symptom: Symptom, store: EmbeddingStore
) -> RelevanceScore:
    """Max cosine similarity of a sentence against the symptom's sub-symptoms."""
    best = -np.inf
    for index in range(len(symptom.sub_symptoms)):
        key = sub_symptom_key(symptom.id, index)
        if key not in store:
            raise KeyError(
                f"missing embedding for sub-symptom {key!r}"
                f" ({symptom.sub_symptoms[index].text!r})"
            )
        best = max(best, cosine(sentence_vec, store.get(key)))
    return RelevanceScore(symptom_id=symptom.id, score=best)


def embed_kg(kg: KnowledgeGraph, dim: int, seed: int, store: EmbeddingStore | None = None) -> EmbeddingStore:
    """Hash-embed every sub-symptom description into a store."""
    store = store if store is not None else EmbeddingStore(dim=dim)
    for symptom in kg.symptoms:
        for index, sub in enumerate(symptom.sub_symptoms):
            store.add(sub_symptom_key(symptom.id, index), hash_embed(sub.text, dim, seed))
    return store


def embed_texts(
    items: Iterable[tuple[str, str]], dim: int, seed: int, store: EmbeddingStore | None = None
) -> EmbeddingStore:
    """Hash-embed (id, text) pairs into a store."""
    store = store if store is not None else EmbeddingStore(dim=dim)
    for item_id, text in items:
        store.add(item_id, hash_embed(text, dim, seed))
    return store
