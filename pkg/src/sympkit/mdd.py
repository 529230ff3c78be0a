"""User-level disease detection from reweighted symptom features.

A posting history becomes a sequence of per-post symptom vectors: the
relevance model's probabilities scaled by a status-presence weight and
a self-subject weight. Two aggregators are provided: a bank of 1-D
convolutions with max-over-time pooling (manual gradients) and a
mean-pool logistic baseline.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .classifier import RelevanceModel, StatusModel, TfidfVectorizer, TrainConfig, f1_score
from .corpus import clean_text, split_text
from .errors import SchemaError, TrainingError

logger = logging.getLogger(__name__)

MAX_POSTS = 256
W_SELF = 0.9
W_OTHER = 0.1
DEFAULT_KERNEL_SIZES = (3, 5, 7)
DEFAULT_CHANNELS = 16
VARIANTS = ("conv", "meanpool")

FIRST_PERSON = frozenset(
    {"i", "me", "my", "mine", "myself", "we", "us", "our", "ours", "ourselves"}
)
OTHER_PERSON = frozenset(
    {
        "he", "she", "they", "him", "her", "them", "his", "hers",
        "their", "theirs", "himself", "herself", "themselves",
    }
)

_TOKEN_RE = re.compile(r"[a-z]+")


@dataclass(frozen=True)
class UserHistory:
    """Time-ordered posting history with per-disease labels.

    Posts must already be ascending in time and truncated to the
    earliest MAX_POSTS entries (the loader does both).
    """

    user_id: str
    posts: tuple[str, ...]
    label: dict[str, bool]

    def __post_init__(self) -> None:
        if len(self.posts) > MAX_POSTS:
            raise SchemaError(
                f"user {self.user_id!r} has {len(self.posts)} posts; "
                f"truncate to the earliest {MAX_POSTS}"
            )


@dataclass(frozen=True)
class PostFeatures:
    """Per-post symptom features and the weights that scaled them."""

    p_rel: np.ndarray
    w_status: float
    w_subj: float
    f_symp: np.ndarray

    def __post_init__(self) -> None:
        if self.p_rel.shape != self.f_symp.shape or self.p_rel.ndim != 1:
            raise SchemaError("p_rel and f_symp must be equal-length vectors")
        if self.p_rel.size and (self.p_rel.min() < 0 or self.p_rel.max() > 1):
            raise SchemaError("p_rel out of [0, 1]")
        if not 0.0 <= self.w_status <= 1.0:
            raise SchemaError("w_status out of [0, 1]")
        if self.w_subj not in (W_SELF, W_OTHER):
            raise SchemaError(f"w_subj must be {W_SELF} or {W_OTHER}")
        if self.f_symp.size and np.any(self.f_symp > self.p_rel + 1e-12):
            raise SchemaError("f_symp may never exceed p_rel")


def subject_weight(text: str, extra_other_patterns: Sequence[str] = ()) -> float:
    """0.9 when first-person use holds its own against other-person talk.

    Counts pronoun tokens case-insensitively on word boundaries;
    ``extra_other_patterns`` are regexes (e.g. for @-mentions) whose
    matches count toward the other-person side. Text with no signal
    defaults to the poster's own voice (0.9).
    """
    tokens = _TOKEN_RE.findall(text.lower())
    first = sum(1 for token in tokens if token in FIRST_PERSON)
    other = sum(1 for token in tokens if token in OTHER_PERSON)
    for pattern in extra_other_patterns:
        other += len(re.findall(pattern, text))
    return W_SELF if first >= other else W_OTHER


def reweight(p_rel: np.ndarray, w_status: float, w_subj: float) -> np.ndarray:
    """Componentwise product of relevance, status, and subject weights."""
    p = np.asarray(p_rel, dtype=float)
    if p.size and (p.min() < 0 or p.max() > 1):
        raise ValueError("p_rel out of [0, 1]")
    if not 0.0 <= w_status <= 1.0:
        raise ValueError("w_status out of [0, 1]")
    if w_subj not in (W_SELF, W_OTHER):
        raise ValueError(f"w_subj must be {W_SELF} or {W_OTHER}")
    return p * w_status * w_subj


def extract_features(
    user: UserHistory,
    relevance: RelevanceModel,
    status: StatusModel,
    vectorizer: TfidfVectorizer,
    reweighting: bool = True,
    extra_other_patterns: Sequence[str] = (),
) -> list[PostFeatures]:
    """Per-post features in posting order.

    Post-level relevance is the max over the post's sentences per
    symptom; the status weight is one minus the mean predicted
    fraction-uncertain. Posts with no usable sentences contribute zero
    relevance. With reweighting off, f_symp passes p_rel through.
    """
    out: list[PostFeatures] = []
    n_symptoms = len(relevance.symptom_ids)
    for text in user.posts:
        sentences = split_text(clean_text(text))
        if sentences:
            features = vectorizer.transform(sentences)
            p_rel = relevance.predict(features).max(axis=0)
            w_status = float(1.0 - status.predict(features).mean())
        else:
            p_rel = np.zeros(n_symptoms)
            w_status = 1.0
        w_subj = subject_weight(text, extra_other_patterns)
        f_symp = reweight(p_rel, w_status, w_subj) if reweighting else p_rel.copy()
        out.append(PostFeatures(p_rel=p_rel, w_status=w_status, w_subj=w_subj, f_symp=f_symp))
    return out


def feature_sequence(features: Sequence[PostFeatures]) -> np.ndarray:
    """Stack per-post f_symp vectors into a (posts, symptoms) matrix."""
    if not features:
        return np.zeros((0, 0))
    return np.stack([pf.f_symp for pf in features])


# ---------------------------------------------------------------------------
# Aggregator models


@dataclass
class ConvAggregator:
    """1-D convolutions of several kernel sizes, max-over-time, sigmoid.

    The feature sequence (posts x symptoms) is convolved along time
    with `channels` filters per kernel size, pooled by max over
    positions, and mapped by one linear output. No hidden activation:
    max pooling supplies the only nonlinearity before the sigmoid.
    """

    in_dim: int
    kernel_sizes: tuple[int, ...]
    channels: int
    kernels: dict[int, np.ndarray]
    kernel_bias: dict[int, np.ndarray]
    out_weights: np.ndarray
    out_bias: float
    seed: int

    variant = "conv"

    @classmethod
    def init(
        cls,
        in_dim: int,
        seed: int,
        kernel_sizes: tuple[int, ...] = DEFAULT_KERNEL_SIZES,
        channels: int = DEFAULT_CHANNELS,
    ) -> "ConvAggregator":
        if in_dim < 1 or channels < 1 or not kernel_sizes:
            raise SchemaError("conv aggregator needs in_dim >= 1, channels >= 1, kernels")
        rng = np.random.default_rng(seed)
        kernels = {
            k: rng.normal(0.0, 1.0 / math.sqrt(k * in_dim), size=(channels, k, in_dim))
            for k in kernel_sizes
        }
        kernel_bias = {k: np.zeros(channels) for k in kernel_sizes}
        pooled = channels * len(kernel_sizes)
        out_weights = rng.normal(0.0, 1.0 / math.sqrt(pooled), size=pooled)
        return cls(
            in_dim=in_dim,
            kernel_sizes=tuple(kernel_sizes),
            channels=channels,
            kernels=kernels,
            kernel_bias=kernel_bias,
            out_weights=out_weights,
            out_bias=0.0,
            seed=seed,
        )

    def _pad(self, sequence: np.ndarray) -> np.ndarray:
        if sequence.ndim != 2 or sequence.shape[1] != self.in_dim:
            raise SchemaError(
                f"sequence must be (posts, {self.in_dim}), got {sequence.shape}"
            )
        if sequence.shape[0] == 0:
            raise SchemaError("empty posting history rejected")
        need = max(self.kernel_sizes) - sequence.shape[0]
        if need > 0:
            sequence = np.vstack([sequence, np.zeros((need, self.in_dim))])
        return sequence

    def _forward(self, sequence: np.ndarray):
        padded = self._pad(sequence)
        pooled_parts = []
        caches = {}
        for k in self.kernel_sizes:
            windows = np.lib.stride_tricks.sliding_window_view(padded, k, axis=0)
            out = np.einsum("tsi,cis->ct", windows, self.kernels[k])
            out += self.kernel_bias[k][:, None]
            argmax = out.argmax(axis=1)
            pooled_parts.append(out[np.arange(self.channels), argmax])
            caches[k] = (windows, argmax)
        pooled = np.concatenate(pooled_parts)
        z = float(self.out_weights @ pooled + self.out_bias)
        return z, pooled, caches

    def predict(self, sequences: Sequence[np.ndarray]) -> np.ndarray:
        return np.array([expit(self._forward(seq)[0]) for seq in sequences])

    # Flat parameter vector: per kernel size the filter block then its
    # bias, then the output weights and bias. Used by the trainer and
    # by finite-difference gradient checks.

    def get_params(self) -> np.ndarray:
        parts = []
        for k in self.kernel_sizes:
            parts.append(self.kernels[k].ravel())
            parts.append(self.kernel_bias[k])
        parts.append(self.out_weights)
        parts.append(np.array([self.out_bias]))
        return np.concatenate(parts)

    def set_params(self, flat: np.ndarray) -> None:
        cursor = 0
        for k in self.kernel_sizes:
            size = self.channels * k * self.in_dim
            self.kernels[k] = (
                flat[cursor : cursor + size].reshape(self.channels, k, self.in_dim).copy()
            )
            cursor += size
            self.kernel_bias[k] = flat[cursor : cursor + self.channels].copy()
            cursor += self.channels
        pooled = self.channels * len(self.kernel_sizes)
        self.out_weights = flat[cursor : cursor + pooled].copy()
        cursor += pooled
        self.out_bias = float(flat[cursor])

    def l2_mask(self) -> np.ndarray:
        """Flat boolean mask of parameters subject to L2 (weights, not biases)."""
        parts = []
        for k in self.kernel_sizes:
            parts.append(np.ones(self.channels * k * self.in_dim, dtype=bool))
            parts.append(np.zeros(self.channels, dtype=bool))
        parts.append(np.ones(self.out_weights.size, dtype=bool))
        parts.append(np.zeros(1, dtype=bool))
        return np.concatenate(parts)

    def loss_and_grad(
        self,
        sequences: Sequence[np.ndarray],
        labels: Sequence[float] | np.ndarray,
        l2: float = 0.0,
    ) -> tuple[float, np.ndarray]:
        """Mean BCE over the batch plus L2, with analytic gradients.

        Max-pooling gradients flow only to each channel's argmax
        window (the standard subgradient).
        """
        y = np.asarray(labels, dtype=float)
        batch = len(sequences)
        if batch == 0 or y.shape != (batch,):
            raise SchemaError("need equal non-zero numbers of sequences and labels")
        grad_kernels = {k: np.zeros_like(self.kernels[k]) for k in self.kernel_sizes}
        grad_kbias = {k: np.zeros_like(self.kernel_bias[k]) for k in self.kernel_sizes}
        grad_v = np.zeros_like(self.out_weights)
        grad_b = 0.0
        total = 0.0
        for seq, target in zip(sequences, y):
            z, pooled, caches = self._forward(seq)
            total += np.logaddexp(0.0, z) - target * z
            dz = (expit(z) - target) / batch
            grad_v += dz * pooled
            grad_b += dz
            d_pooled = dz * self.out_weights
            offset = 0
            for k in self.kernel_sizes:
                dh = d_pooled[offset : offset + self.channels]
                offset += self.channels
                windows, argmax = caches[k]
                # windows[argmax] is (channels, in_dim, k); kernels are (channels, k, in_dim)
                grad_kernels[k] += dh[:, None, None] * windows[argmax].transpose(0, 2, 1)
                grad_kbias[k] += dh
        loss = total / batch
        flat_parts = []
        for k in self.kernel_sizes:
            flat_parts.append(grad_kernels[k].ravel())
            flat_parts.append(grad_kbias[k])
        flat_parts.append(grad_v)
        flat_parts.append(np.array([grad_b]))
        grad = np.concatenate(flat_parts)
        if l2:
            params = self.get_params()
            mask = self.l2_mask()
            loss += l2 * float((params[mask] * params[mask]).sum())
            grad[mask] += 2.0 * l2 * params[mask]
        return float(loss), grad


@dataclass
class MeanPoolLR:
    """Logistic regression on the mean of f_symp over a user's posts."""

    in_dim: int
    weights: np.ndarray
    bias: float
    seed: int

    variant = "meanpool"

    @classmethod
    def init(cls, in_dim: int, seed: int) -> "MeanPoolLR":
        return cls(in_dim=in_dim, weights=np.zeros(in_dim), bias=0.0, seed=seed)

    def _pool(self, sequence: np.ndarray) -> np.ndarray:
        if sequence.ndim != 2 or sequence.shape[1] != self.in_dim:
            raise SchemaError(
                f"sequence must be (posts, {self.in_dim}), got {sequence.shape}"
            )
        if sequence.shape[0] == 0:
            raise SchemaError("empty posting history rejected")
        return sequence.mean(axis=0)

    def predict(self, sequences: Sequence[np.ndarray]) -> np.ndarray:
        pooled = np.stack([self._pool(seq) for seq in sequences])
        return expit(pooled @ self.weights + self.bias)

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.weights, np.array([self.bias])])

    def set_params(self, flat: np.ndarray) -> None:
        self.weights = flat[: self.in_dim].copy()
        self.bias = float(flat[self.in_dim])

    def l2_mask(self) -> np.ndarray:
        return np.concatenate([np.ones(self.in_dim, dtype=bool), np.zeros(1, dtype=bool)])

    def loss_and_grad(
        self,
        sequences: Sequence[np.ndarray],
        labels: Sequence[float] | np.ndarray,
        l2: float = 0.0,
    ) -> tuple[float, np.ndarray]:
        y = np.asarray(labels, dtype=float)
        pooled = np.stack([self._pool(seq) for seq in sequences])
        z = pooled @ self.weights + self.bias
        loss = float((np.logaddexp(0.0, z) - y * z).mean())
        dz = (expit(z) - y) / len(sequences)
        grad = np.concatenate([dz @ pooled, np.array([dz.sum()])])
        if l2:
            loss += l2 * float(self.weights @ self.weights)
            grad[: self.in_dim] += 2.0 * l2 * self.weights
        return loss, grad


MddModel = ConvAggregator | MeanPoolLR

DEFAULT_CONV_CONFIG = TrainConfig(learning_rate=0.05, epochs=60, batch_size=16)
DEFAULT_MEANPOOL_CONFIG = TrainConfig(learning_rate=0.5, epochs=80, batch_size=16)


def assemble_binary(
    users: Sequence[UserHistory],
    sequences: Mapping[str, np.ndarray],
    disease_id: str,
) -> tuple[list[np.ndarray], np.ndarray, list[str]]:
    """Binary task for one disease: its diagnosed users versus controls.

    Controls carry no disease label at all; users diagnosed only with
    other diseases are excluded from this run.
    """
    seqs: list[np.ndarray] = []
    labels: list[bool] = []
    ids: list[str] = []
    for user in users:
        positive = bool(user.label.get(disease_id, False))
        control = not any(user.label.values())
        if not positive and not control:
            continue
        seqs.append(sequences[user.user_id])
        labels.append(positive)
        ids.append(user.user_id)
    return seqs, np.array(labels, dtype=bool), ids


def train_mdd(
    sequences: Sequence[np.ndarray],
    labels: Sequence[bool] | np.ndarray,
    variant: str = "conv",
    config: TrainConfig | None = None,
    validation: tuple[Sequence[np.ndarray], np.ndarray] | None = None,
    kernel_sizes: tuple[int, ...] = DEFAULT_KERNEL_SIZES,
    channels: int = DEFAULT_CHANNELS,
) -> MddModel:
    """Train a binary detector on feature sequences.

    Deterministic per seed; early stopping tracks validation F1 with
    the configured patience and restores the best snapshot.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    y = np.asarray(labels, dtype=bool)
    if len(sequences) == 0 or y.shape != (len(sequences),):
        raise SchemaError("need equal non-zero numbers of sequences and labels")
    if not y.any() or y.all():
        raise SchemaError("training needs at least one positive and one control user")
    if config is None:
        config = DEFAULT_CONV_CONFIG if variant == "conv" else DEFAULT_MEANPOOL_CONFIG
    in_dim = sequences[0].shape[1]
    if variant == "conv":
        model: MddModel = ConvAggregator.init(
            in_dim, config.seed, kernel_sizes=kernel_sizes, channels=channels
        )
    else:
        model = MeanPoolLR.init(in_dim, config.seed)
    params = model.get_params()
    velocity = np.zeros_like(params)
    rng = np.random.default_rng(config.seed)
    y_float = y.astype(float)
    best_score = -np.inf
    best_params: np.ndarray | None = None
    stale = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(sequences))
        for start in range(0, len(sequences), config.batch_size):
            batch = order[start : start + config.batch_size]
            model.set_params(params)
            loss, grad = model.loss_and_grad(
                [sequences[i] for i in batch], y_float[batch], config.l2
            )
            if not math.isfinite(loss):
                raise TrainingError(
                    f"mdd[{variant}]: loss became non-finite at epoch {epoch}"
                )
            velocity = config.momentum * velocity - config.learning_rate * grad
            params = params + velocity
        model.set_params(params)
        if validation is not None:
            val_seqs, val_labels = validation
            score = f1_score(model.predict(val_seqs), np.asarray(val_labels, dtype=bool))
            if score > best_score:
                best_score = score
                best_params = params.copy()
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    if validation is not None and best_params is not None:
        model.set_params(best_params)
    return model


@dataclass(frozen=True)
class MddEval:
    per_disease_f1: dict[str, float]
    macro_f1: float
    excluded: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "per_disease_f1": {d: self.per_disease_f1[d] for d in sorted(self.per_disease_f1)},
            "macro_f1": self.macro_f1,
            "excluded": sorted(self.excluded),
        }


def eval_mdd(
    models: Mapping[str, MddModel],
    test_sets: Mapping[str, tuple[Sequence[np.ndarray], np.ndarray]],
    threshold: float = 0.5,
) -> MddEval:
    """Positive-class F1 per disease at the threshold, plus the macro mean.

    Diseases with no test positives are excluded and reported.
    """
    per_disease: dict[str, float] = {}
    excluded: list[str] = []
    for disease_id in sorted(models):
        seqs, labels = test_sets[disease_id]
        labels = np.asarray(labels, dtype=bool)
        if not labels.any():
            logger.warning("disease %r: no test positives, excluded from macro", disease_id)
            excluded.append(disease_id)
            continue
        probs = models[disease_id].predict(seqs)
        per_disease[disease_id] = f1_score(probs, labels, threshold)
    macro = float(np.mean(list(per_disease.values()))) if per_disease else 0.0
    return MddEval(per_disease_f1=per_disease, macro_f1=macro, excluded=tuple(excluded))


# ---------------------------------------------------------------------------
# File formats


def load_users(path: str | Path) -> list[UserHistory]:
    """Read NDJSON users; posts are sorted by time and truncated to the
    earliest MAX_POSTS."""
    users: list[UserHistory] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                posts = sorted(rec["posts"], key=lambda p: int(p["created_utc"]))
                users.append(
                    UserHistory(
                        user_id=str(rec["user_id"]),
                        posts=tuple(str(p["text"]) for p in posts[:MAX_POSTS]),
                        label={str(d): bool(v) for d, v in rec.get("label", {}).items()},
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad user record: {exc!r}") from exc
    seen: set[str] = set()
    for user in users:
        if user.user_id in seen:
            raise SchemaError(f"duplicate user id {user.user_id!r}")
        seen.add(user.user_id)
    return users


def save_users(users: Sequence[UserHistory], path: str | Path) -> None:
    """Write user histories as NDJSON, with post order as the timeline."""
    with open(path, "w", encoding="utf-8") as handle:
        for user in users:
            record = {
                "user_id": user.user_id,
                "label": {d: bool(v) for d, v in sorted(user.label.items())},
                "posts": [
                    {"created_utc": 1000 + t, "text": text}
                    for t, text in enumerate(user.posts)
                ],
            }
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def save_mdd_model(path: str | Path, model: MddModel) -> None:
    if isinstance(model, ConvAggregator):
        payload = {
            "kind": "conv",
            "in_dim": model.in_dim,
            "kernel_sizes": list(model.kernel_sizes),
            "channels": model.channels,
            "params": model.get_params().tolist(),
            "seed": model.seed,
        }
    else:
        payload = {
            "kind": "meanpool",
            "in_dim": model.in_dim,
            "params": model.get_params().tolist(),
            "seed": model.seed,
        }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_mdd_model(path: str | Path) -> MddModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        params = np.asarray(payload["params"], dtype=float)
        if payload["kind"] == "conv":
            model: MddModel = ConvAggregator.init(
                in_dim=int(payload["in_dim"]),
                seed=int(payload["seed"]),
                kernel_sizes=tuple(int(k) for k in payload["kernel_sizes"]),
                channels=int(payload["channels"]),
            )
        elif payload["kind"] == "meanpool":
            model = MeanPoolLR.init(in_dim=int(payload["in_dim"]), seed=int(payload["seed"]))
        else:
            raise SchemaError(f"unknown model kind {payload['kind']!r}")
        model.set_params(params)
        return model
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"cannot parse model file {path}: {exc!r}") from exc
