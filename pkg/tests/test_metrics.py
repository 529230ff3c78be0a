"""Ranking and regression metrics against brute-force oracles."""

import numpy as np
import pytest

from sympkit.classifier import (
    MASK_MISSING,
    LabelMask,
    auc_score,
    f1_score,
    mae,
    mae_bounds,
    relevance_metrics,
)


def auc_oracle(scores: np.ndarray, labels: np.ndarray) -> float:
    """All positive-negative pairs, ties worth half."""
    pos = scores[labels]
    neg = scores[~labels]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def test_auc_known_example():
    scores = [0.1, 0.4, 0.35, 0.8]
    labels = [False, False, True, True]
    assert auc_score(scores, labels) == pytest.approx(0.75)


def test_auc_perfect_and_inverted():
    labels = [False, False, True, True]
    assert auc_score([0.0, 0.1, 0.9, 1.0], labels) == 1.0
    assert auc_score([1.0, 0.9, 0.1, 0.0], labels) == 0.0


def test_auc_all_tied_is_half():
    assert auc_score([0.5, 0.5, 0.5, 0.5], [True, False, True, False]) == 0.5


def test_auc_matches_pairwise_oracle():
    rng = np.random.default_rng(83)
    for _ in range(40):
        n = int(rng.integers(4, 60))
        labels = rng.random(n) < 0.5
        if not labels.any() or labels.all():
            continue
        # Quantized scores force tie handling through the oracle too.
        scores = np.round(rng.random(n), 1)
        assert auc_score(scores, labels) == pytest.approx(
            auc_oracle(scores, labels), abs=1e-12
        )


def test_auc_rejects_single_class():
    with pytest.raises(ValueError):
        auc_score([0.1, 0.9], [True, True])
    with pytest.raises(ValueError):
        auc_score([0.1, 0.9], [False, False])


def test_f1_hand_computed():
    scores = [0.9, 0.8, 0.3, 0.6]
    labels = [True, False, True, False]
    # tp=1 (0.9), fp=2 (0.8, 0.6), fn=1 (0.3).
    assert f1_score(scores, labels) == pytest.approx(2 * 1 / (2 * 1 + 2 + 1))


def test_f1_threshold_is_inclusive():
    assert f1_score([0.5], [True]) == 1.0
    assert f1_score([0.49999], [True]) == 0.0


def test_f1_degenerate_cases():
    assert f1_score([0.1, 0.2], [False, False]) == 0.0


def test_mae_and_bounds_brute_force():
    rng = np.random.default_rng(97)
    for _ in range(30):
        n = int(rng.integers(1, 50))
        targets = rng.integers(0, 4, size=n) / 3.0
        bounds = mae_bounds(targets)
        q_bar = float(np.mean(targets))
        baseline = float(np.mean([abs(q_bar - q) for q in targets]))
        single = float(np.mean([q * (1 - q) + (1 - q) * q for q in targets]))
        assert bounds.baseline == pytest.approx(baseline, abs=1e-12)
        assert bounds.single_annotator == pytest.approx(single, abs=1e-12)
    preds = np.array([0.2, 0.8])
    assert mae(preds, np.array([0.0, 1.0])) == pytest.approx(0.2)


def test_mae_bounds_known_values():
    # Half the targets 0 and half 1: constant-mean predicts 0.5
    # everywhere, while unanimous panels make a lone annotator exact.
    bounds = mae_bounds([0.0, 1.0, 0.0, 1.0])
    assert bounds.baseline == pytest.approx(0.5, abs=1e-12)
    assert bounds.single_annotator == pytest.approx(0.0, abs=1e-12)
    # q = 1/3 throughout: baseline collapses to zero spread, single
    # annotator costs 2 * (1/3) * (2/3) = 4/9.
    bounds = mae_bounds([1 / 3, 1 / 3, 1 / 3])
    assert bounds.baseline == pytest.approx(0.0, abs=1e-12)
    assert bounds.single_annotator == pytest.approx(4 / 9, abs=1e-12)


def test_relevance_metrics_excludes_single_class_columns():
    probs = np.array([
        [0.9, 0.2, 0.7],
        [0.1, 0.8, 0.6],
        [0.7, 0.3, 0.4],
    ])
    states = np.array([
        [1, 0, 1],
        [0, 1, 1],
        [1, MASK_MISSING, 1],
    ], dtype=np.int8)
    mask = LabelMask(
        sentence_ids=("x0", "x1", "x2"),
        symptom_ids=("s1", "s2", "s3"),
        states=states,
    )
    result = relevance_metrics(probs, mask)
    assert result.excluded == ("s3",)
    assert set(result.per_symptom_auc) == {"s1", "s2"}
    # s1: positives score {0.9, 0.7}, negative {0.1}: perfect ranking.
    assert result.per_symptom_auc["s1"] == 1.0
    assert result.per_symptom_auc["s2"] == 1.0
    assert result.macro_auc == 1.0


def test_relevance_metrics_only_scores_observed_entries():
    probs = np.array([[0.9, 0.1], [0.2, 0.9], [0.6, 0.5]])
    states = np.array([
        [1, MASK_MISSING],
        [0, 1],
        [MASK_MISSING, 0],
    ], dtype=np.int8)
    mask = LabelMask(
        sentence_ids=("x0", "x1", "x2"), symptom_ids=("s1", "s2"), states=states
    )
    result = relevance_metrics(probs, mask)
    # s1 observed rows are x0 (pos, 0.9) and x1 (neg, 0.2).
    assert result.per_symptom_auc["s1"] == 1.0
    # s2 observed rows are x1 (pos, 0.9) and x2 (neg, 0.5).
    assert result.per_symptom_auc["s2"] == 1.0
