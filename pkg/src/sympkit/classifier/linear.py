"""Logistic scorers over sparse features, trained with missing-label care.

Three regimes handle labels that were never annotated: treat them as
negatives (naive), mask them out of the loss, or run a two-stage
teacher-student pass that converts confidently-negative missing entries
before masked training.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence, TypeVar

import numpy as np
from scipy.special import expit

from ..annotations import GoldLabel
from ..errors import SchemaError, TrainingError
from .tfidf import TfidfConfig, TfidfVectorizer

logger = logging.getLogger(__name__)

MASK_POSITIVE = 1
MASK_NEGATIVE = 0
MASK_MISSING = -1

MODES = ("naive_negative", "loss_mask", "label_enhance")
DEFAULT_TARGET_TNR = 0.9

T = TypeVar("T")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; defaults are tuned for the linear tier."""

    learning_rate: float = 0.5
    epochs: int = 40
    batch_size: int = 64
    patience: int = 4
    seed: int = 0
    balanced_sampler: bool = False
    momentum: float = 0.9
    l2: float = 1e-4

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise SchemaError("learning rate must be positive")
        if self.patience < 1:
            raise SchemaError("patience must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise SchemaError("epochs and batch size must be >= 1")
        if not 0 <= self.momentum < 1:
            raise SchemaError("momentum must be in [0, 1)")
        if self.l2 < 0:
            raise SchemaError("l2 must be non-negative")


@dataclass(frozen=True)
class LabelMask:
    """Per (sentence, symptom) label state: positive, negative, or missing.

    Missing means never annotated (outside the sentence's disease
    queue), which is distinct from an observed negative.
    """

    sentence_ids: tuple[str, ...]
    symptom_ids: tuple[str, ...]
    states: np.ndarray

    def __post_init__(self) -> None:
        if self.states.shape != (len(self.sentence_ids), len(self.symptom_ids)):
            raise SchemaError("mask shape does not match id lists")
        valid = {MASK_POSITIVE, MASK_NEGATIVE, MASK_MISSING}
        if not set(np.unique(self.states)) <= valid:
            raise SchemaError("mask states must be 1 (positive), 0 (negative), or -1 (missing)")

    @classmethod
    def from_gold(
        cls,
        gold: Mapping[str, GoldLabel],
        symptom_ids: Sequence[str],
        sentence_ids: Sequence[str] | None = None,
    ) -> "LabelMask":
        sentences = tuple(sentence_ids) if sentence_ids is not None else tuple(sorted(gold))
        columns = {symptom: j for j, symptom in enumerate(symptom_ids)}
        states = np.full((len(sentences), len(columns)), MASK_MISSING, dtype=np.int8)
        for i, sentence_id in enumerate(sentences):
            label = gold[sentence_id]
            for symptom in label.observed:
                if symptom in columns:
                    states[i, columns[symptom]] = MASK_NEGATIVE
            for symptom in label.relevant:
                if symptom in columns:
                    states[i, columns[symptom]] = MASK_POSITIVE
        return cls(sentence_ids=sentences, symptom_ids=tuple(symptom_ids), states=states)

    def observed(self) -> np.ndarray:
        return self.states != MASK_MISSING


@dataclass
class RelevanceModel:
    symptom_ids: tuple[str, ...]
    weights: np.ndarray
    bias: np.ndarray
    mode: str
    seed: int
    skipped: tuple[str, ...] = ()

    def predict(self, features) -> np.ndarray:
        """Per-symptom probabilities, shape (n, S)."""
        return expit(np.asarray(features @ self.weights.T) + self.bias)


@dataclass
class StatusModel:
    weights: np.ndarray
    bias: float
    seed: int

    def predict(self, features) -> np.ndarray:
        """Predicted fraction-uncertain per sentence, shape (n,)."""
        return expit(np.asarray(features @ self.weights) + self.bias)


def bce_loss_and_grad(
    weights: np.ndarray,
    bias: float,
    features: np.ndarray,
    targets: np.ndarray,
    sample_weight: np.ndarray | None = None,
    l2: float = 0.0,
) -> tuple[float, np.ndarray, float]:
    """Weighted-mean binary cross-entropy for one sigmoid output.

    Targets may be fractional (annotator distributions). Uses the
    overflow-safe form softplus(z) - y*z. Returns (loss, grad_weights,
    grad_bias); the same math drives the mini-batch trainers, so
    finite-difference checks on this function cover them.
    """
    z = np.asarray(features @ weights) + bias
    y = np.asarray(targets, dtype=float)
    w = np.ones_like(y) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    denom = max(float(w.sum()), 1.0)
    loss = float((w * (np.logaddexp(0.0, z) - y * z)).sum() / denom)
    loss += l2 * float(weights @ weights)
    g = w * (expit(z) - y) / denom
    grad_w = np.asarray(g @ features) + 2.0 * l2 * weights
    grad_b = float(g.sum())
    return loss, grad_w, grad_b


def balanced_batches(
    pool_a: Sequence[T], pool_b: Sequence[T], batch_size: int, seed: int
) -> Iterator[list[T]]:
    """One epoch of half-and-half batches from two pools.

    The larger pool is fully covered once per epoch; the smaller pool
    is resampled with replacement. Deterministic per seed.
    """
    if batch_size < 2 or batch_size % 2:
        raise SchemaError("batch size must be even and >= 2")
    if not pool_a or not pool_b:
        raise SchemaError("both pools must be non-empty")
    half = batch_size // 2
    rng = np.random.default_rng(seed)
    a_larger = len(pool_a) >= len(pool_b)
    larger, smaller = (pool_a, pool_b) if a_larger else (pool_b, pool_a)
    order = list(rng.permutation(len(larger)))
    n_batches = math.ceil(len(larger) / half)
    pad = n_batches * half - len(larger)
    if pad:
        order.extend(int(i) for i in rng.choice(len(larger), size=pad, replace=True))
    for k in range(n_batches):
        big = [larger[i] for i in order[k * half : (k + 1) * half]]
        small = [smaller[int(i)] for i in rng.choice(len(smaller), size=half, replace=True)]
        yield (big + small) if a_larger else (small + big)


def tnr_threshold(
    scores: Sequence[float] | np.ndarray,
    negatives: Sequence[bool] | np.ndarray,
    target_tnr: float = DEFAULT_TARGET_TNR,
) -> float:
    """Smallest threshold whose true-negative rate meets the target.

    Scores strictly below the returned threshold are predicted
    negative; the fraction of known negatives below it is >= target.
    """
    if not 0.0 < target_tnr <= 1.0:
        raise ValueError("target TNR must be in (0, 1]")
    score_arr = np.asarray(scores, dtype=float)
    neg_scores = np.sort(score_arr[np.asarray(negatives, dtype=bool)])
    if neg_scores.size == 0:
        raise ValueError("no known negatives to calibrate against")
    # Guard against float noise pushing an exact product over the next integer.
    rank = max(1, math.ceil(target_tnr * neg_scores.size - 1e-12))
    return float(np.nextafter(neg_scores[rank - 1], np.inf))


def _epoch_batches(
    n: int,
    config: TrainConfig,
    rng: np.random.Generator,
    pools: tuple[np.ndarray, np.ndarray] | None,
) -> list[np.ndarray]:
    if pools is not None:
        epoch_seed = int(rng.integers(2**32))
        return [
            np.asarray(batch, dtype=np.int64)
            for batch in balanced_batches(
                list(pools[0]), list(pools[1]), config.batch_size, epoch_seed
            )
        ]
    order = rng.permutation(n)
    return [order[k : k + config.batch_size] for k in range(0, n, config.batch_size)]


def _train_outputs(
    features,
    targets: np.ndarray,
    loss_weights: np.ndarray,
    config: TrainConfig,
    validation_fn: Callable[[np.ndarray, np.ndarray], float] | None = None,
    pools: tuple[np.ndarray, np.ndarray] | None = None,
    stage: str = "training",
) -> tuple[np.ndarray, np.ndarray]:
    """Mini-batch gradient descent over S independent sigmoid outputs.

    Loss is the arithmetic mean across outputs of the weighted-mean
    cross-entropy, plus L2 on the weights. Deterministic per seed;
    non-finite loss aborts. validation_fn scores (weights, bias) with
    higher better; patience epochs without improvement stop training
    and the best snapshot is restored.
    """
    n, dim = features.shape
    n_outputs = targets.shape[1]
    rng = np.random.default_rng(config.seed)
    weights = np.zeros((n_outputs, dim))
    bias = np.zeros(n_outputs)
    vel_w = np.zeros_like(weights)
    vel_b = np.zeros_like(bias)
    best_score = -np.inf
    best: tuple[np.ndarray, np.ndarray] | None = None
    stale = 0
    for epoch in range(config.epochs):
        for batch in _epoch_batches(n, config, rng, pools):
            x_b = features[batch]
            y_b = targets[batch]
            w_b = loss_weights[batch]
            z = np.asarray(x_b @ weights.T) + bias
            denom = np.maximum(w_b.sum(axis=0), 1.0)
            bce = ((np.logaddexp(0.0, z) - y_b * z) * w_b).sum(axis=0) / denom
            loss = float(bce.mean() + config.l2 * (weights * weights).sum())
            if not math.isfinite(loss):
                raise TrainingError(
                    f"{stage}: loss became non-finite at epoch {epoch} "
                    f"(learning rate {config.learning_rate:g})"
                )
            g = (expit(z) - y_b) * w_b / denom
            grad_w = np.asarray(x_b.T @ g).T + 2.0 * config.l2 * weights
            grad_b = g.sum(axis=0)
            vel_w = config.momentum * vel_w - config.learning_rate * grad_w
            vel_b = config.momentum * vel_b - config.learning_rate * grad_b
            weights = weights + vel_w
            bias = bias + vel_b
        if validation_fn is not None:
            score = validation_fn(weights, bias)
            if score > best_score:
                best_score = score
                best = (weights.copy(), bias.copy())
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    if validation_fn is not None and best is not None:
        weights, bias = best
    return weights, bias


def _trainable_columns(states: np.ndarray, weights: np.ndarray) -> np.ndarray:
    has_pos = ((states == MASK_POSITIVE) & (weights > 0)).any(axis=0)
    has_neg = ((states != MASK_POSITIVE) & (weights > 0)).any(axis=0)
    return has_pos & has_neg


def train_relevance(
    features,
    mask: LabelMask,
    config: TrainConfig,
    mode: str = "loss_mask",
    validation: tuple[object, LabelMask] | None = None,
    control_rows: np.ndarray | None = None,
    target_tnr: float = DEFAULT_TARGET_TNR,
) -> RelevanceModel:
    """Train the multi-label relevance model under a missing-label regime.

    Symptoms lacking both a positive and a negative training label are
    skipped (zero weights) and reported on the model. With the balanced
    sampler, ``control_rows`` flags the control pool.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "label_enhance":
        teacher = train_relevance(
            features, mask, config, "loss_mask", validation=validation,
            control_rows=control_rows,
        )
        enhanced, report = enhance_labels(teacher, features, mask, target_tnr)
        converted = sum(entry.get("converted", 0) for entry in report.values())
        logger.info("label enhancement converted %d missing entries to negative", converted)
        student = train_relevance(
            features, enhanced, config, "loss_mask", validation=validation,
            control_rows=control_rows,
        )
        student.mode = "label_enhance"
        return student

    states = mask.states.copy()
    if mode == "naive_negative":
        states[states == MASK_MISSING] = MASK_NEGATIVE
        loss_weights = np.ones(states.shape, dtype=float)
    else:
        loss_weights = (states != MASK_MISSING).astype(float)
    trainable = _trainable_columns(states, loss_weights)
    skipped = tuple(
        symptom for j, symptom in enumerate(mask.symptom_ids) if not trainable[j]
    )
    for symptom in skipped:
        logger.warning("symptom %r skipped: needs >=1 positive and >=1 negative", symptom)
    loss_weights[:, ~trainable] = 0.0
    targets = (states == MASK_POSITIVE).astype(float)

    pools = None
    if config.balanced_sampler and control_rows is not None:
        control_rows = np.asarray(control_rows, dtype=bool)
        pools = (np.flatnonzero(~control_rows), np.flatnonzero(control_rows))

    validation_fn = None
    if validation is not None:
        val_features, val_mask = validation
        validation_fn = _relevance_validation_fn(val_features, val_mask)

    weights, bias = _train_outputs(
        features, targets, loss_weights, config,
        validation_fn=validation_fn, pools=pools, stage=f"relevance[{mode}]",
    )
    return RelevanceModel(
        symptom_ids=mask.symptom_ids, weights=weights, bias=bias,
        mode=mode, seed=config.seed, skipped=skipped,
    )


def _relevance_validation_fn(features, mask: LabelMask):
    from .metrics import auc_score

    states = mask.states

    def score(weights: np.ndarray, bias: np.ndarray) -> float:
        probs = expit(np.asarray(features @ weights.T) + bias)
        aucs = []
        for j in range(states.shape[1]):
            observed = states[:, j] != MASK_MISSING
            labels = states[observed, j] == MASK_POSITIVE
            if labels.any() and not labels.all():
                aucs.append(auc_score(probs[observed, j], labels))
        return float(np.mean(aucs)) if aucs else -np.inf

    return score


def enhance_labels(
    teacher: RelevanceModel,
    features,
    mask: LabelMask,
    target_tnr: float = DEFAULT_TARGET_TNR,
) -> tuple[LabelMask, dict[str, dict]]:
    """Convert confidently-negative missing entries using teacher scores.

    Per symptom, the threshold is calibrated on that symptom's observed
    annotations for the target true-negative rate; missing entries the
    teacher scores below it become negatives. Positives and observed
    negatives are never touched.
    """
    if teacher.mode != "loss_mask":
        raise ValueError("label enhancement requires a loss-masked teacher")
    probs = teacher.predict(features)
    states = mask.states.copy()
    report: dict[str, dict] = {}
    for j, symptom in enumerate(mask.symptom_ids):
        column = mask.states[:, j]
        observed = column != MASK_MISSING
        negatives = column == MASK_NEGATIVE
        if not negatives.any():
            logger.warning("symptom %r: no observed negatives, enhancement skipped", symptom)
            report[symptom] = {"skipped": "no observed negatives"}
            continue
        threshold = tnr_threshold(
            probs[observed, j], negatives[observed], target_tnr
        )
        convert = (column == MASK_MISSING) & (probs[:, j] < threshold)
        states[convert, j] = MASK_NEGATIVE
        report[symptom] = {
            "threshold": threshold,
            "converted": int(convert.sum()),
            "achieved_tnr": float((probs[negatives, j] < threshold).mean()),
        }
    enhanced = LabelMask(
        sentence_ids=mask.sentence_ids, symptom_ids=mask.symptom_ids, states=states
    )
    return enhanced, report


def train_status(
    features,
    targets: Sequence[float] | np.ndarray,
    config: TrainConfig,
    validation: tuple[object, np.ndarray] | None = None,
) -> StatusModel:
    """Regress annotator fraction-uncertain with a sigmoid output.

    Targets are distributions in [0, 1] (for three annotators: 0, 1/3,
    2/3, 1) and are learned directly via cross-entropy, never rounded.
    """
    q = np.asarray(targets, dtype=float)
    if q.ndim != 1 or q.shape[0] != features.shape[0]:
        raise SchemaError("targets must be one value per sentence")
    if q.size and (q.min() < 0.0 or q.max() > 1.0):
        raise SchemaError("status targets must lie in [0, 1]")

    validation_fn = None
    if validation is not None:
        val_features, val_q = validation
        val_q = np.asarray(val_q, dtype=float)

        def validation_fn(weights: np.ndarray, bias: np.ndarray) -> float:
            p = expit(np.asarray(val_features @ weights[0]) + bias[0])
            return -float(np.abs(p - val_q).mean())

    weights, bias = _train_outputs(
        features, q[:, None], np.ones((q.shape[0], 1)), config,
        validation_fn=validation_fn, stage="status",
    )
    return StatusModel(weights=weights[0], bias=float(bias[0]), seed=config.seed)


# ---------------------------------------------------------------------------
# Serialization

_FORMAT_VERSION = 1


def save_model(path: str | Path, model: RelevanceModel | StatusModel,
               vectorizer: TfidfVectorizer) -> None:
    """Write a model plus its feature vocabulary as one JSON file."""
    payload: dict = {
        "format_version": _FORMAT_VERSION,
        "vocabulary": vectorizer.vocabulary,
        "idf": vectorizer.idf.tolist(),
        "tfidf_config": {
            "min_df": vectorizer.config.min_df,
            "max_vocab": vectorizer.config.max_vocab,
            "lowercase": vectorizer.config.lowercase,
            "token_pattern": vectorizer.config.token_pattern,
        },
        "seed": model.seed,
    }
    if isinstance(model, RelevanceModel):
        payload.update(
            kind="relevance",
            symptom_ids=list(model.symptom_ids),
            weights=model.weights.tolist(),
            bias=model.bias.tolist(),
            mode=model.mode,
            skipped=list(model.skipped),
        )
    else:
        payload.update(
            kind="status",
            weights=model.weights.tolist(),
            bias=model.bias,
        )
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> tuple[RelevanceModel | StatusModel, TfidfVectorizer]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        config = TfidfConfig(**payload["tfidf_config"])
        vectorizer = TfidfVectorizer(
            vocabulary={str(k): int(v) for k, v in payload["vocabulary"].items()},
            idf=np.asarray(payload["idf"], dtype=float),
            config=config,
        )
        if payload["kind"] == "relevance":
            model: RelevanceModel | StatusModel = RelevanceModel(
                symptom_ids=tuple(payload["symptom_ids"]),
                weights=np.asarray(payload["weights"], dtype=float),
                bias=np.asarray(payload["bias"], dtype=float),
                mode=payload["mode"],
                seed=int(payload["seed"]),
                skipped=tuple(payload["skipped"]),
            )
        elif payload["kind"] == "status":
            model = StatusModel(
                weights=np.asarray(payload["weights"], dtype=float),
                bias=float(payload["bias"]),
                seed=int(payload["seed"]),
            )
        else:
            raise SchemaError(f"unknown model kind {payload['kind']!r}")
        return model, vectorizer
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"cannot parse model file {path}: {exc!r}") from exc
