"""Ranking, threshold, and regression metrics for the sentence models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from ..errors import SchemaError
from .linear import MASK_MISSING, MASK_POSITIVE, LabelMask, RelevanceModel, StatusModel

DEFAULT_F1_THRESHOLD = 0.5


def auc_score(scores: Sequence[float] | np.ndarray, labels: Sequence[bool] | np.ndarray) -> float:
    """Area under the ROC curve; ties credit 0.5 per positive-negative pair.

    Computed as the Mann-Whitney statistic via average ranks, which
    equals trapezoidal integration over the exact ROC.
    """
    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    n_neg = int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = stats.rankdata(s, method="average")
    rank_sum = float(ranks[y].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def f1_score(
    scores: Sequence[float] | np.ndarray,
    labels: Sequence[bool] | np.ndarray,
    threshold: float = DEFAULT_F1_THRESHOLD,
) -> float:
    """F1 of the positive class with predictions at score >= threshold."""
    y = np.asarray(labels, dtype=bool)
    predicted = np.asarray(scores, dtype=float) >= threshold
    tp = int((predicted & y).sum())
    fp = int((predicted & ~y).sum())
    fn = int((~predicted & y).sum())
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


@dataclass(frozen=True)
class RelevanceMetrics:
    per_symptom_auc: dict[str, float]
    per_symptom_f1: dict[str, float]
    macro_auc: float
    macro_f1: float
    excluded: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "per_symptom": {
                symptom: {
                    "auc": self.per_symptom_auc[symptom],
                    "f1": self.per_symptom_f1[symptom],
                }
                for symptom in sorted(self.per_symptom_auc)
            },
            "macro_auc": self.macro_auc,
            "macro_f1": self.macro_f1,
            "excluded": sorted(self.excluded),
        }


@dataclass(frozen=True)
class StatusMetrics:
    mae: float
    baseline_mae: float
    single_annotator_mae: float

    def to_dict(self) -> dict:
        return {
            "mae": self.mae,
            "baseline_mae": self.baseline_mae,
            "single_annotator_mae": self.single_annotator_mae,
        }


def relevance_metrics(
    probs: np.ndarray,
    mask: LabelMask,
    threshold: float = DEFAULT_F1_THRESHOLD,
) -> RelevanceMetrics:
    """Per-symptom AUC and F1 over observed entries, plus macro means.

    Symptoms whose observed labels are single-class are excluded from
    the macros and reported.
    """
    if probs.shape != mask.states.shape:
        raise SchemaError("probability matrix shape does not match mask")
    per_auc: dict[str, float] = {}
    per_f1: dict[str, float] = {}
    excluded: list[str] = []
    for j, symptom in enumerate(mask.symptom_ids):
        observed = mask.states[:, j] != MASK_MISSING
        labels = mask.states[observed, j] == MASK_POSITIVE
        if not labels.any() or labels.all():
            excluded.append(symptom)
            continue
        column = probs[observed, j]
        per_auc[symptom] = auc_score(column, labels)
        per_f1[symptom] = f1_score(column, labels, threshold)
    macro_auc = float(np.mean(list(per_auc.values()))) if per_auc else 0.0
    macro_f1 = float(np.mean(list(per_f1.values()))) if per_f1 else 0.0
    return RelevanceMetrics(
        per_symptom_auc=per_auc,
        per_symptom_f1=per_f1,
        macro_auc=macro_auc,
        macro_f1=macro_f1,
        excluded=tuple(excluded),
    )


def evaluate_relevance(
    model: RelevanceModel, features, mask: LabelMask,
    threshold: float = DEFAULT_F1_THRESHOLD,
) -> RelevanceMetrics:
    if model.symptom_ids != mask.symptom_ids:
        raise SchemaError("model and mask cover different symptom sets")
    return relevance_metrics(model.predict(features), mask, threshold)


def mae(predictions: Sequence[float] | np.ndarray, targets: Sequence[float] | np.ndarray) -> float:
    p = np.asarray(predictions, dtype=float)
    q = np.asarray(targets, dtype=float)
    if p.shape != q.shape or p.ndim != 1 or p.size == 0:
        raise SchemaError("predictions and targets must be equal-length non-empty vectors")
    return float(np.abs(p - q).mean())


@dataclass(frozen=True)
class MaeBounds:
    """Reference MAEs bracketing a useful status model.

    ``baseline`` predicts the test-set mean for every item (the
    no-model figure a trained model must beat); ``single_annotator`` is
    the expected absolute deviation of one random annotator's binary
    vote, mean of 2q(1-q) (the figure a model is not expected to beat).
    """

    baseline: float
    single_annotator: float


def mae_bounds(targets: Sequence[float] | np.ndarray) -> MaeBounds:
    q = np.asarray(targets, dtype=float)
    if q.ndim != 1 or q.size == 0:
        raise SchemaError("targets must be a non-empty vector")
    baseline = float(np.abs(q.mean() - q).mean())
    single = float((2.0 * q * (1.0 - q)).mean())
    return MaeBounds(baseline=baseline, single_annotator=single)


def evaluate_status(
    model: StatusModel, features, targets: Sequence[float] | np.ndarray
) -> StatusMetrics:
    q = np.asarray(targets, dtype=float)
    predictions = model.predict(features)
    bounds = mae_bounds(q)
    return StatusMetrics(
        mae=mae(predictions, q),
        baseline_mae=bounds.baseline,
        single_annotator_mae=bounds.single_annotator,
    )
