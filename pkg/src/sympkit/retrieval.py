"""Candidate selection queues, MinHash/LSH deduplication, retrieval metrics.

Candidate selection keeps, per symptom of a disease, the
``capacity``-highest-scoring sentences seen so far in a bounded heap
(ties keep the earlier sentence). Near-duplicates among the selected
candidates are collapsed with MinHash signatures banded for locality-
sensitive hashing: any pair sharing a band bucket is checked against a
signature-match threshold, and each connected component of confirmed
pairs keeps its lexicographically smallest id.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embed import EmbeddingStore, symptom_relevance
from .kg import KnowledgeGraph, typical_symptoms

DEFAULT_CAPACITY = 300
DEFAULT_NUM_HASHES = 128
DEFAULT_SHINGLE_SIZE = 3
DEFAULT_BANDS = 32
DEFAULT_ROWS = 4
DEFAULT_DEDUP_THRESHOLD = 0.8


@dataclass
class CandidateQueue:
    """Bounded min-heap of the top-scoring sentences for one symptom.

    An incoming sentence is kept if the queue has room or its score is
    strictly larger than the current minimum; on equal scores the
    earlier arrival wins (and among queued ties the latest arrival is
    evicted first), so the final contents equal a stable
    sort-by-score-descending prefix.
    """

    symptom_id: str
    capacity: int = DEFAULT_CAPACITY
    _heap: list[tuple[float, int, str]] = field(default_factory=list, repr=False)
    _arrivals: int = field(default=0, repr=False)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError(f"queue capacity must be >= 1, got {self.capacity}")

    def offer(self, sentence_id: str, score: float) -> None:
        entry = (score, -self._arrivals, sentence_id)
        self._arrivals += 1
        if len(self._heap) < self.capacity:
            heapq.heappush(self._heap, entry)
        elif score > self._heap[0][0]:
            heapq.heapreplace(self._heap, entry)

    def entries(self) -> list[tuple[str, float]]:
        """Queue contents ordered by score descending, earlier arrival first."""
        ordered = sorted(self._heap, key=lambda e: (-e[0], -e[1]))
        return [(sentence_id, score) for score, _neg_arrival, sentence_id in ordered]

    def __len__(self) -> int:
        return len(self._heap)


def candidate_queues(
    sentences: Iterable[tuple[str, np.ndarray]],
    kg: KnowledgeGraph,
    disease_id: str,
    store: EmbeddingStore,
    capacity: int = DEFAULT_CAPACITY,
) -> dict[str, CandidateQueue]:
    """Offer every sentence to one queue per typical symptom of the disease."""
    queues = {
        symptom_id: CandidateQueue(symptom_id=symptom_id, capacity=capacity)
        for symptom_id in sorted(typical_symptoms(kg, disease_id))
    }
    symptoms = [kg.symptom(symptom_id) for symptom_id in queues]
    for sentence_id, vec in sentences:
        for symptom in symptoms:
            score = symptom_relevance(vec, symptom, store).score
            queues[symptom.id].offer(sentence_id, score)
    return queues


def select_candidates(
    sentences: Iterable[tuple[str, np.ndarray]],
    kg: KnowledgeGraph,
    disease_id: str,
    store: EmbeddingStore,
    capacity: int = DEFAULT_CAPACITY,
) -> set[str]:
    """Union of all per-symptom queue contents (pre-deduplication)."""
    queues = candidate_queues(sentences, kg, disease_id, store, capacity)
    selected: set[str] = set()
    for queue in queues.values():
        selected.update(sentence_id for sentence_id, _score in queue.entries())
    return selected


@dataclass(frozen=True)
class MinHashSignature:
    values: np.ndarray
    shingle_size: int

    def match_fraction(self, other: "MinHashSignature") -> float:
        if len(self.values) != len(other.values):
            raise ValueError("signatures have different lengths")
        return float(np.mean(self.values == other.values))


def _shingle_set(text: str, shingle_size: int) -> set[str]:
    if len(text) < shingle_size:
        return {text}
    return {text[i : i + shingle_size] for i in range(len(text) - shingle_size + 1)}


def _base_hashes(shingles: set[str]) -> np.ndarray:
    out = np.empty(len(shingles), dtype=np.uint64)
    for i, shingle in enumerate(sorted(shingles)):
        digest = hashlib.blake2b(shingle.encode("utf-8"), digest_size=8).digest()
        out[i] = int.from_bytes(digest, "little")
    return out


def _hash_family(k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    # k affine permutations of the 64-bit hash space: odd multiplier a,
    # arbitrary offset b, arithmetic mod 2**64 via uint64 wraparound.
    rng = np.random.default_rng(seed)
    a = rng.integers(1, 2**63, size=k, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
    b = rng.integers(0, 2**63, size=k, dtype=np.uint64)
    return a, b


def minhash_signature(
    text: str,
    k: int = DEFAULT_NUM_HASHES,
    shingle_size: int = DEFAULT_SHINGLE_SIZE,
    seed: int = 0,
) -> MinHashSignature:
    """k minimum hash values over the text's character shingle set."""
    if k < 16:
        raise ValueError(f"minhash needs k >= 16, got {k}")
    base = _base_hashes(_shingle_set(text, shingle_size))
    a, b = _hash_family(k, seed)
    with np.errstate(over="ignore"):
        hashed = base[None, :] * a[:, None] + b[:, None]
    return MinHashSignature(values=hashed.min(axis=1), shingle_size=shingle_size)


class _UnionFind:
    def __init__(self, items: Iterable[str]) -> None:
        self.parent = {item: item for item in items}

    def find(self, item: str) -> str:
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def lsh_dedup(
    candidates: Sequence[tuple[str, str]],
    bands: int = DEFAULT_BANDS,
    rows: int = DEFAULT_ROWS,
    k: int = DEFAULT_NUM_HASHES,
    seed: int = 0,
    shingle_size: int = DEFAULT_SHINGLE_SIZE,
    threshold: float = DEFAULT_DEDUP_THRESHOLD,
) -> list[str]:
    """Collapse near-duplicate texts, keeping one survivor per duplicate group.

    Pairs sharing any LSH band bucket are duplicate candidates; a pair
    is confirmed when its signature match fraction is >= ``threshold``.
    Confirmed pairs are closed into connected components and each
    component keeps its lexicographically smallest id. Survivor order
    follows the input order.
    """
    if bands * rows != k:
        raise ValueError(f"bands*rows must equal k: {bands}*{rows} != {k}")
    ids = [candidate_id for candidate_id, _text in candidates]
    if len(set(ids)) != len(ids):
        raise ValueError("candidate ids must be unique")
    signatures = {
        candidate_id: minhash_signature(text, k=k, shingle_size=shingle_size, seed=seed)
        for candidate_id, text in candidates
    }
    buckets: dict[tuple[int, bytes], list[str]] = {}
    for candidate_id, sig in signatures.items():
        for band in range(bands):
            chunk = sig.values[band * rows : (band + 1) * rows].tobytes()
            buckets.setdefault((band, chunk), []).append(candidate_id)
    uf = _UnionFind(ids)
    checked: set[tuple[str, str]] = set()
    for bucket_ids in buckets.values():
        if len(bucket_ids) < 2:
            continue
        for i in range(len(bucket_ids)):
            for j in range(i + 1, len(bucket_ids)):
                pair = (bucket_ids[i], bucket_ids[j])
                if pair in checked:
                    continue
                checked.add(pair)
                if signatures[pair[0]].match_fraction(signatures[pair[1]]) >= threshold:
                    uf.union(*pair)
    keeper: dict[str, str] = {}
    for candidate_id in ids:
        root = uf.find(candidate_id)
        if root not in keeper or candidate_id < keeper[root]:
            keeper[root] = candidate_id
    keep = set(keeper.values())
    return [candidate_id for candidate_id in ids if candidate_id in keep]


@dataclass(frozen=True)
class RetrievalEval:
    """Per-symptom precision/recall plus unweighted macro means.

    Macro means run over symptoms with at least one gold positive;
    precision additionally requires at least one retrieved sentence and
    is recorded as ``None`` otherwise. With no qualifying symptom the
    macro values are reported as 0.0.
    """

    per_symptom_precision: dict[str, float | None]
    per_symptom_recall: dict[str, float]
    macro_precision: float
    macro_recall: float


def evaluate_retrieval(
    scores: Mapping[tuple[str, str], float],
    gold: Mapping[tuple[str, str], bool],
    threshold: float = 0.5,
) -> RetrievalEval:
    """Threshold scores against gold (sentence, symptom) relevance pairs.

    Gold keys missing from ``scores`` count as not retrieved (score -1).
    """
    tally: dict[str, list[int]] = {}
    for (sentence_id, symptom_id), is_relevant in gold.items():
        retrieved = scores.get((sentence_id, symptom_id), -1.0) >= threshold
        tp, fp, fn = tally.setdefault(symptom_id, [0, 0, 0])
        if retrieved and is_relevant:
            tp += 1
        elif retrieved:
            fp += 1
        elif is_relevant:
            fn += 1
        tally[symptom_id] = [tp, fp, fn]
    precisions: dict[str, float | None] = {}
    recalls: dict[str, float] = {}
    for symptom_id, (tp, fp, fn) in tally.items():
        if tp + fn == 0:
            continue  # no gold positives: excluded from macro averages
        recalls[symptom_id] = tp / (tp + fn)
        precisions[symptom_id] = tp / (tp + fp) if tp + fp > 0 else None
    defined_p = [p for p in precisions.values() if p is not None]
    return RetrievalEval(
        per_symptom_precision=precisions,
        per_symptom_recall=recalls,
        macro_precision=float(np.mean(defined_p)) if defined_p else 0.0,
        macro_recall=float(np.mean(list(recalls.values()))) if recalls else 0.0,
    )


class KeywordLexicon:
    """Case-insensitive term list; any single term hit retrieves a sentence."""

    def __init__(self, terms: Iterable[str]) -> None:
        self.terms = tuple(sorted({t.strip().lower() for t in terms if t.strip()}))

    @classmethod
    def load(cls, path: str | Path) -> "KeywordLexicon":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(lines)

    def matches(self, text: str) -> bool:
        lowered = text.lower()
        return any(term in lowered for term in self.terms)


def keyword_scores(
    sentences: Iterable[tuple[str, str]], lexicons: Mapping[str, KeywordLexicon]
) -> dict[tuple[str, str], float]:
    """1.0/0.0 retrieval scores from per-symptom keyword lexicons."""
    out: dict[tuple[str, str], float] = {}
    for sentence_id, text in sentences:
        for symptom_id, lexicon in lexicons.items():
            out[(sentence_id, symptom_id)] = 1.0 if lexicon.matches(text) else 0.0
    return out
