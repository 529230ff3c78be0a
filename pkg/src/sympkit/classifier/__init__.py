"""Sentence-level models: symptom relevance (multi-label, missing-label
aware) and status inference on annotator-distribution targets.

The trainable tier is TF-IDF features with per-output logistic scorers,
built from scratch so the masking, enhancement, and evaluation
mechanics stay inspectable and bit-deterministic.
"""

from .linear import (
    MASK_MISSING,
    MASK_NEGATIVE,
    MASK_POSITIVE,
    MODES,
    LabelMask,
    RelevanceModel,
    StatusModel,
    TrainConfig,
    balanced_batches,
    bce_loss_and_grad,
    enhance_labels,
    load_model,
    save_model,
    tnr_threshold,
    train_relevance,
    train_status,
)
from .metrics import (
    MaeBounds,
    RelevanceMetrics,
    StatusMetrics,
    auc_score,
    evaluate_relevance,
    evaluate_status,
    f1_score,
    mae,
    mae_bounds,
    relevance_metrics,
)
from .tfidf import TfidfConfig, TfidfVectorizer, fit_tfidf

__all__ = [
    "MASK_MISSING",
    "MASK_NEGATIVE",
    "MASK_POSITIVE",
    "MODES",
    "LabelMask",
    "MaeBounds",
    "RelevanceMetrics",
    "RelevanceModel",
    "StatusMetrics",
    "StatusModel",
    "TfidfConfig",
    "TfidfVectorizer",
    "TrainConfig",
    "auc_score",
    "balanced_batches",
    "bce_loss_and_grad",
    "enhance_labels",
    "evaluate_relevance",
    "evaluate_status",
    "f1_score",
    "fit_tfidf",
    "load_model",
    "mae",
    "mae_bounds",
    "relevance_metrics",
    "save_model",
    "tnr_threshold",
    "train_relevance",
    "train_status",
]
