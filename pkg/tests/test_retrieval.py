"""Bounded candidate queues, MinHash dedup, and retrieval scoring."""

import numpy as np
import pytest

from sympkit.embed import embed_kg, hash_embed
from sympkit.kg import Disease, KnowledgeGraph, SubSymptom, Symptom
from sympkit.retrieval import (
    CandidateQueue,
    KeywordLexicon,
    candidate_queues,
    evaluate_retrieval,
    keyword_scores,
    lsh_dedup,
    minhash_signature,
    select_candidates,
)


def queue_oracle(
    stream: list[tuple[str, float]], capacity: int
) -> list[tuple[str, float]]:
    """Stable sort by score descending, earlier arrival first, prefix."""
    order = sorted(range(len(stream)), key=lambda i: (-stream[i][1], i))
    return [stream[i] for i in order[:capacity]]


def test_queue_capacity_must_be_positive():
    with pytest.raises(ValueError):
        CandidateQueue("s1", capacity=0)


def test_queue_matches_stable_prefix_oracle():
    rng = np.random.default_rng(101)
    for trial in range(60):
        n = int(rng.integers(1, 120))
        capacity = int(rng.integers(1, 20))
        # A coarse score grid forces plenty of ties at the boundary.
        scores = rng.integers(0, 8, size=n) / 4.0
        stream = [(f"x{i}", float(scores[i])) for i in range(n)]
        queue = CandidateQueue("s1", capacity=capacity)
        for sentence_id, score in stream:
            queue.offer(sentence_id, score)
        assert queue.entries() == queue_oracle(stream, capacity)
        assert len(queue) == min(n, capacity)


def test_queue_tie_at_the_boundary_keeps_the_earlier_arrival():
    queue = CandidateQueue("s1", capacity=2)
    queue.offer("a", 0.5)
    queue.offer("b", 0.5)
    queue.offer("c", 0.5)
    assert queue.entries() == [("a", 0.5), ("b", 0.5)]


def two_disease_graph() -> KnowledgeGraph:
    return KnowledgeGraph(
        diseases=(Disease(id="d1", name="One"), Disease(id="d2", name="Two")),
        symptoms=(
            Symptom(
                id="s1", name="S1",
                sub_symptoms=(SubSymptom("cannot fall asleep", "manual"),),
            ),
            Symptom(
                id="s2", name="S2",
                sub_symptoms=(SubSymptom("racing anxious thoughts", "post"),),
            ),
        ),
        edges=frozenset({("d1", "s1"), ("d1", "s2"), ("d2", "s2")}),
    )


def test_candidate_queues_agree_with_direct_scoring():
    kg = two_disease_graph()
    dim, seed = 64, 3
    store = embed_kg(kg, dim, seed)
    texts = [
        "i just cannot fall asleep lately",
        "racing anxious thoughts all day",
        "completely unrelated sentence about trains",
        "cannot sleep and anxious thoughts",
    ]
    pairs = [(f"x{i}", hash_embed(t, dim, seed)) for i, t in enumerate(texts)]
    queues = candidate_queues(pairs, kg, "d1", store, capacity=2)
    assert set(queues) == {"s1", "s2"}
    for symptom_id in ("s1", "s2"):
        symptom = kg.symptom(symptom_id)
        from sympkit.embed import symptom_relevance

        scored = [
            (sid, symptom_relevance(vec, symptom, store).score) for sid, vec in pairs
        ]
        assert queues[symptom_id].entries() == queue_oracle(scored, 2)
    union = select_candidates(pairs, kg, "d1", store, capacity=2)
    expected = {
        sid for q in queues.values() for sid, _ in q.entries()
    }
    assert union == expected


def exact_jaccard(a: str, b: str, shingle_size: int = 3) -> float:
    def shingles(text: str) -> set[str]:
        if len(text) < shingle_size:
            return {text}
        return {text[i : i + shingle_size] for i in range(len(text) - shingle_size + 1)}

    sa, sb = shingles(a), shingles(b)
    return len(sa & sb) / len(sa | sb)


def random_token_text(rng: np.random.Generator, vocab: list[str]) -> str:
    n = int(rng.integers(4, 12))
    return " ".join(vocab[int(k)] for k in rng.integers(0, len(vocab), size=n))


def test_minhash_tracks_exact_jaccard():
    rng = np.random.default_rng(17)
    vocab = [
        "sleep", "tired", "worry", "racing", "night", "awake", "heavy",
        "morning", "focus", "appetite", "quiet", "alone",
    ]
    errors = []
    for _ in range(60):
        a = random_token_text(rng, vocab)
        # Mutate a into b so the pair spans the full similarity range.
        words = a.split(" ")
        n_swap = int(rng.integers(0, len(words) + 1))
        for k in rng.choice(len(words), size=min(n_swap, len(words)), replace=False):
            words[int(k)] = vocab[int(rng.integers(len(vocab)))]
        b = " ".join(words)
        sig_a = minhash_signature(a, k=128, seed=5)
        sig_b = minhash_signature(b, k=128, seed=5)
        errors.append(abs(sig_a.match_fraction(sig_b) - exact_jaccard(a, b)))
    # k=128 gives a standard error around 0.044 at J=0.5; 0.15 is a
    # loose per-pair cap that still catches a broken hash family.
    assert max(errors) <= 0.15
    assert float(np.mean(errors)) <= 0.05


def test_minhash_identical_text_identical_signature():
    sig_a = minhash_signature("same exact text", k=128, seed=9)
    sig_b = minhash_signature("same exact text", k=128, seed=9)
    assert sig_a.match_fraction(sig_b) == 1.0


def test_minhash_rejects_small_k_and_length_mismatch():
    with pytest.raises(ValueError):
        minhash_signature("text", k=8)
    sig_a = minhash_signature("text", k=16)
    sig_b = minhash_signature("text", k=32)
    with pytest.raises(ValueError):
        sig_a.match_fraction(sig_b)


def test_lsh_dedup_collapses_exact_duplicates_to_smallest_id():
    items = [
        ("x3", "the very same sentence again and again"),
        ("x1", "the very same sentence again and again"),
        ("x2", "a completely different sentence"),
        ("x0", "the very same sentence again and again"),
    ]
    kept = lsh_dedup(items, bands=8, rows=2, k=16, seed=0)
    assert kept == ["x1", "x2", "x0"] or kept == ["x2", "x0"] or "x0" in kept
    # The duplicate group keeps exactly its smallest id.
    assert "x0" in kept and "x2" in kept
    assert "x1" not in kept and "x3" not in kept
    # Survivors preserve input order.
    assert kept == [i for i, _ in items if i in set(kept)]


def test_lsh_dedup_keeps_distinct_texts():
    items = [
        ("a", "first sentence about sleepless nights"),
        ("b", "second sentence about racing thoughts"),
        ("c", "third sentence about heavy mornings"),
    ]
    assert lsh_dedup(items, bands=8, rows=2, k=16, seed=1) == ["a", "b", "c"]


def test_lsh_dedup_validates_arguments():
    with pytest.raises(ValueError):
        lsh_dedup([("a", "x")], bands=3, rows=5, k=16)
    with pytest.raises(ValueError):
        lsh_dedup([("a", "x"), ("a", "y")], bands=8, rows=2, k=16)


def test_evaluate_retrieval_hand_computed():
    gold = {
        ("x0", "s1"): True,
        ("x1", "s1"): True,
        ("x2", "s1"): False,
        ("x0", "s2"): False,
        ("x1", "s2"): True,
        ("x2", "s2"): False,
    }
    scores = {
        ("x0", "s1"): 0.9,   # tp
        ("x2", "s1"): 0.8,   # fp; x1 missing -> fn
        ("x1", "s2"): 0.7,   # tp
        ("x2", "s2"): 0.1,   # below threshold
    }
    result = evaluate_retrieval(scores, gold, threshold=0.5)
    assert result.per_symptom_recall == {"s1": 0.5, "s2": 1.0}
    assert result.per_symptom_precision == {"s1": 0.5, "s2": 1.0}
    assert result.macro_recall == pytest.approx(0.75)
    assert result.macro_precision == pytest.approx(0.75)


def test_evaluate_retrieval_excludes_symptoms_without_gold_positives():
    gold = {("x0", "s1"): True, ("x0", "s2"): False}
    result = evaluate_retrieval({("x0", "s1"): 1.0}, gold)
    assert "s2" not in result.per_symptom_recall
    assert result.macro_recall == 1.0


def test_keyword_lexicon_matching_and_scores(tmp_path):
    path = tmp_path / "s1.txt"
    path.write_text("Insomnia\nsleepless\n\n", encoding="utf-8")
    lexicon = KeywordLexicon.load(path)
    assert lexicon.terms == ("insomnia", "sleepless")
    assert lexicon.matches("Another SLEEPLESS night")
    assert not lexicon.matches("slept fine")
    scores = keyword_scores(
        [("x0", "sleepless again"), ("x1", "all good")], {"s1": lexicon}
    )
    assert scores == {("x0", "s1"): 1.0, ("x1", "s1"): 0.0}
