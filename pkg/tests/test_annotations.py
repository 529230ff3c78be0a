"""Annotation merging, agreement, quality scoring, and gold assembly."""

import math

import numpy as np
import pytest

from sympkit.annotations import (
    AnnotationRecord,
    GoldLabel,
    Status,
    build_gold,
    fleiss_kappa,
    load_annotations,
    load_gold,
    merge_relevance,
    merge_status,
    quality_score,
    save_annotations,
    save_gold,
    sentence_status_from_symptom_status,
)
from sympkit.errors import SchemaError


def record(
    sentence_id: str,
    annotator_id: str,
    relevance: dict[str, bool],
    status: Status | None = None,
) -> AnnotationRecord:
    return AnnotationRecord(
        sentence_id=sentence_id,
        annotator_id=annotator_id,
        relevance=relevance,
        status=status,
    )


def test_record_requires_status_exactly_when_marked_positive():
    with pytest.raises(SchemaError):
        record("x0", "a1", {"s1": True}, status=None)
    with pytest.raises(SchemaError):
        record("x0", "a1", {"s1": False}, status=Status.TRUE)
    record("x0", "a1", {"s1": True}, status=Status.UNCERTAIN)
    record("x0", "a1", {"s1": False}, status=None)


def test_merge_relevance_takes_the_union():
    records = [
        record("x0", "a1", {"s1": True, "s2": False}, Status.TRUE),
        record("x0", "a2", {"s1": False, "s2": True}, Status.UNCERTAIN),
        record("x0", "a3", {"s1": False, "s2": False}),
    ]
    relevant, observed = merge_relevance(records)
    assert relevant == frozenset({"s1", "s2"})
    assert observed == frozenset({"s1", "s2"})


def test_merge_relevance_rejects_mixed_sentences_or_keys():
    with pytest.raises(SchemaError):
        merge_relevance([
            record("x0", "a1", {"s1": False}),
            record("x1", "a2", {"s1": False}),
        ])
    with pytest.raises(SchemaError):
        merge_relevance([
            record("x0", "a1", {"s1": False}),
            record("x0", "a2", {"s2": False}),
        ])


def test_merge_status_is_the_uncertain_fraction():
    records = [
        record("x0", "a1", {"s1": True}, Status.TRUE),
        record("x0", "a2", {"s1": True}, Status.UNCERTAIN),
        record("x0", "a3", {"s1": True}, Status.UNCERTAIN),
    ]
    assert merge_status(records) == pytest.approx(2 / 3)
    no_status = [record("x0", "a1", {"s1": False})]
    assert merge_status(no_status) == 0.0


def test_sentence_status_any_uncertain_wins():
    assert (
        sentence_status_from_symptom_status({"s1": Status.TRUE, "s2": Status.UNCERTAIN})
        == Status.UNCERTAIN
    )
    assert (
        sentence_status_from_symptom_status({"s1": Status.TRUE, "s2": Status.TRUE})
        == Status.TRUE
    )


def test_build_gold_merges_per_sentence():
    records = [
        record("x0", "a1", {"s1": True, "s2": False}, Status.TRUE),
        record("x0", "a2", {"s1": True, "s2": False}, Status.UNCERTAIN),
        record("x0", "a3", {"s1": False, "s2": False}),
        record("x1", "a1", {"s1": False, "s2": False}),
        record("x1", "a2", {"s1": False, "s2": False}),
        record("x1", "a3", {"s1": False, "s2": False}),
    ]
    gold = build_gold(records)
    assert set(gold) == {"x0", "x1"}
    assert gold["x0"].relevant == frozenset({"s1"})
    assert gold["x0"].observed == frozenset({"s1", "s2"})
    assert gold["x0"].status_q == pytest.approx(0.5)
    assert gold["x0"].status_applicable
    assert gold["x1"].relevant == frozenset()
    assert not gold["x1"].status_applicable


def pairwise_kappa_oracle(matrix: np.ndarray, n: int) -> float:
    """Agreement via agreeing rater pairs, chance-corrected.

    Observed agreement counts agreeing pairs per item out of C(n, 2);
    expected agreement squares the pooled category shares.
    """
    matrix = np.asarray(matrix, dtype=float)
    pairs = n * (n - 1) / 2
    agreeing = (matrix * (matrix - 1) / 2).sum(axis=1)
    p_bar = float((agreeing / pairs).mean())
    shares = matrix.sum(axis=0) / matrix.sum()
    p_e = float((shares * shares).sum())
    return (p_bar - p_e) / (1 - p_e)


def test_fleiss_kappa_matches_pairwise_oracle():
    rng = np.random.default_rng(59)
    for _ in range(30):
        items = int(rng.integers(2, 15))
        categories = int(rng.integers(2, 5))
        n = int(rng.integers(2, 7))
        matrix = np.zeros((items, categories), dtype=int)
        for i in range(items):
            votes = rng.integers(0, categories, size=n)
            for v in votes:
                matrix[i, int(v)] += 1
        kappa = fleiss_kappa(matrix, n)
        oracle = pairwise_kappa_oracle(matrix, n)
        if math.isnan(oracle) or math.isinf(oracle):
            continue
        assert kappa == pytest.approx(oracle, abs=1e-9)


def test_fleiss_kappa_textbook_example():
    # Widely reproduced 10-item, 5-category, 14-rater worked example.
    matrix = [
        [0, 0, 0, 0, 14],
        [0, 2, 6, 4, 2],
        [0, 0, 3, 5, 6],
        [0, 3, 9, 2, 0],
        [2, 2, 8, 1, 1],
        [7, 7, 0, 0, 0],
        [3, 2, 6, 3, 0],
        [2, 5, 3, 2, 2],
        [6, 5, 2, 1, 0],
        [0, 2, 2, 3, 7],
    ]
    assert fleiss_kappa(matrix, 14) == pytest.approx(0.210, abs=5e-4)


def test_fleiss_kappa_perfect_agreement_is_exactly_one():
    matrix = [[3, 0], [0, 3], [3, 0]]
    assert fleiss_kappa(matrix, 3) == 1.0


def test_fleiss_kappa_single_category_is_nan():
    assert math.isnan(fleiss_kappa([[3, 0], [3, 0]], 3))


def test_fleiss_kappa_validates_shape_and_rows():
    with pytest.raises(SchemaError):
        fleiss_kappa([[2, 1]], 3)
    with pytest.raises(SchemaError):
        fleiss_kappa([[2, 1], [1, 1]], 3)
    with pytest.raises(SchemaError):
        fleiss_kappa([[1, 0], [0, 1]], 1)


def test_quality_score_recall_weighted_case():
    # precision 1/3, recall 2/3 under beta=2 gives 5/9, scaled to 55.56.
    candidate = {
        "k1": True, "k2": True, "k3": True, "k4": True, "k5": True, "k6": True,
        "k7": False,
    }
    reference = {
        "k1": True, "k2": True, "k3": False, "k4": False, "k5": False, "k6": False,
        "k7": True,
    }
    score = quality_score(candidate, reference, beta=2.0)
    assert score.f_beta == pytest.approx(500 / 9, abs=1e-9)
    assert round(score.f_beta, 2) == 55.56
    assert not score.passes
    assert score.rejected


def test_quality_score_thresholds():
    perfect = quality_score({"k": True}, {"k": True})
    assert perfect.f_beta == 100.0
    assert perfect.passes and not perfect.rejected
    with pytest.raises(SchemaError):
        quality_score({"k1": True}, {"k2": True})


def test_annotations_tsv_round_trip(tmp_path):
    records = [
        record("x0", "a1", {"s1": True, "s2": False}, Status.UNCERTAIN),
        record("x0", "a2", {"s1": False, "s2": False}),
        record("x1", "a1", {"s1": True}, Status.TRUE),
    ]
    path = tmp_path / "annotations.tsv"
    save_annotations(records, path)
    loaded = load_annotations(path)
    assert sorted(loaded, key=lambda r: (r.sentence_id, r.annotator_id)) == sorted(
        records, key=lambda r: (r.sentence_id, r.annotator_id)
    )


def test_load_annotations_rejects_duplicate_marks(tmp_path):
    path = tmp_path / "annotations.tsv"
    path.write_text(
        "x0\ta1\ts1\t1\tT\nx0\ta1\ts1\t0\t\n",
        encoding="utf-8",
    )
    with pytest.raises(SchemaError):
        load_annotations(path)


def test_gold_round_trip(tmp_path):
    gold = {
        "x0": GoldLabel(
            sentence_id="x0",
            relevant=frozenset({"s1"}),
            observed=frozenset({"s1", "s2"}),
            status_q=1 / 3,
            n_annotators=3,
        ),
        "x1": GoldLabel(
            sentence_id="x1",
            relevant=frozenset(),
            observed=frozenset({"s1"}),
            status_q=0.0,
            n_annotators=3,
        ),
    }
    path = tmp_path / "gold.json"
    save_gold(gold, path)
    assert load_gold(path) == gold
