"""Label masks, logistic training under missing labels, and enhancement."""

import math

import numpy as np
import pytest
from scipy.special import expit

from sympkit.annotations import GoldLabel
from sympkit.classifier import (
    MASK_MISSING,
    MASK_NEGATIVE,
    MASK_POSITIVE,
    MODES,
    LabelMask,
    RelevanceModel,
    TrainConfig,
    balanced_batches,
    bce_loss_and_grad,
    enhance_labels,
    fit_tfidf,
    load_model,
    save_model,
    tnr_threshold,
    train_relevance,
    train_status,
)
from sympkit.errors import SchemaError


def make_mask(states: np.ndarray, symptoms: tuple[str, ...] | None = None) -> LabelMask:
    states = np.asarray(states, dtype=np.int8)
    if symptoms is None:
        symptoms = tuple(f"s{j + 1}" for j in range(states.shape[1]))
    return LabelMask(
        sentence_ids=tuple(f"x{i}" for i in range(states.shape[0])),
        symptom_ids=symptoms,
        states=states,
    )


def test_modes_and_train_config_validation():
    assert MODES == ("naive_negative", "loss_mask", "label_enhance")
    with pytest.raises(SchemaError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(SchemaError):
        TrainConfig(epochs=0)
    with pytest.raises(SchemaError):
        TrainConfig(batch_size=0)


def test_label_mask_validation_and_observed():
    mask = make_mask([[1, MASK_MISSING], [0, 1]])
    observed = mask.observed()
    assert observed.tolist() == [[True, False], [True, True]]
    with pytest.raises(SchemaError):
        make_mask([[3, 0]])
    with pytest.raises(SchemaError):
        LabelMask(sentence_ids=("x0",), symptom_ids=("s1",), states=np.zeros((2, 1), np.int8))


def test_label_mask_from_gold():
    gold = {
        "x0": GoldLabel(
            sentence_id="x0",
            relevant=frozenset({"s1"}),
            observed=frozenset({"s1", "s2"}),
            status_q=0.0,
            n_annotators=3,
        ),
        "x1": GoldLabel(
            sentence_id="x1",
            relevant=frozenset(),
            observed=frozenset({"s2"}),
            status_q=0.0,
            n_annotators=3,
        ),
    }
    mask = LabelMask.from_gold(gold, ("s1", "s2", "s3"))
    assert mask.sentence_ids == ("x0", "x1")
    assert mask.states.tolist() == [
        [MASK_POSITIVE, MASK_NEGATIVE, MASK_MISSING],
        [MASK_MISSING, MASK_NEGATIVE, MASK_MISSING],
    ]


def finite_difference(loss_fn, params: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(params)
    for k in range(params.size):
        up = params.copy()
        down = params.copy()
        up[k] += eps
        down[k] -= eps
        grad[k] = (loss_fn(up) - loss_fn(down)) / (2 * eps)
    return grad


def test_bce_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n, d = int(rng.integers(3, 12)), int(rng.integers(2, 6))
        X = rng.normal(size=(n, d))
        y = (rng.random(n) < 0.5).astype(float)
        w = rng.normal(size=d) * 0.5
        b = float(rng.normal())
        sw = rng.random(n)
        l2 = float(rng.choice([0.0, 1e-3, 1e-2]))

        def loss_of(params: np.ndarray) -> float:
            return bce_loss_and_grad(params[:-1], float(params[-1]), X, y, sw, l2)[0]

        loss, grad_w, grad_b = bce_loss_and_grad(w, b, X, y, sw, l2)
        packed = np.concatenate([w, [b]])
        numeric = finite_difference(loss_of, packed)
        analytic = np.concatenate([grad_w, [grad_b]])
        denom = max(1.0, float(np.linalg.norm(numeric)))
        assert float(np.linalg.norm(analytic - numeric)) / denom <= 1e-4


def test_bce_zero_weight_rows_contribute_nothing():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(6, 3))
    y = np.array([1, 0, 1, 0, 1, 0], dtype=float)
    w = rng.normal(size=3)
    sw = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 0.5])
    keep = sw > 0
    full = bce_loss_and_grad(w, 0.1, X, y, sw)
    pruned = bce_loss_and_grad(w, 0.1, X[keep], y[keep], sw[keep])
    assert full[0] == pytest.approx(pruned[0], abs=1e-15)
    assert full[1] == pytest.approx(pruned[1], abs=1e-15)
    assert full[2] == pytest.approx(pruned[2], abs=1e-15)


def test_balanced_batches_cover_larger_pool_once():
    rng = np.random.default_rng(11)
    for _ in range(15):
        n_a = int(rng.integers(1, 30))
        n_b = int(rng.integers(1, 30))
        batch = int(rng.choice([2, 4, 8]))
        pool_a = [f"a{k}" for k in range(n_a)]
        pool_b = [f"b{k}" for k in range(n_b)]
        seed = int(rng.integers(100))
        batches = list(balanced_batches(pool_a, pool_b, batch, seed))
        again = list(balanced_batches(pool_a, pool_b, batch, seed))
        assert batches == again
        larger = pool_a if n_a >= n_b else pool_b
        half = batch // 2
        assert len(batches) == math.ceil(len(larger) / half)
        flat = [item for b in batches for item in b]
        assert set(larger) <= set(flat)
        for b in batches:
            assert len(b) == batch
            assert sum(1 for item in b if item.startswith("a")) == half


def test_balanced_batches_validation():
    with pytest.raises(SchemaError):
        list(balanced_batches([1], [2], 3, 0))
    with pytest.raises(SchemaError):
        list(balanced_batches([], [2], 2, 0))


def test_tnr_threshold_rank_boundaries():
    scores = np.arange(1, 11) / 10.0
    negatives = np.ones(10, dtype=bool)
    # target * n landing exactly on an integer picks that rank.
    thr = tnr_threshold(scores, negatives, 0.9)
    assert thr == np.nextafter(0.9, np.inf)
    assert float(np.mean(scores < thr)) == 0.9
    # Otherwise the rank rounds up.
    thr = tnr_threshold(scores, negatives, 0.85)
    assert thr == np.nextafter(0.9, np.inf)
    thr = tnr_threshold(scores, negatives, 1.0)
    assert float(np.mean(scores < thr)) == 1.0


def test_tnr_threshold_oracle_properties():
    rng = np.random.default_rng(29)
    for _ in range(40):
        n = int(rng.integers(2, 80))
        # Coarse grid scores create ties across the rank boundary.
        scores = rng.integers(0, 12, size=n) / 10.0
        negatives = rng.random(n) < 0.7
        if not negatives.any():
            continue
        target = float(rng.choice([0.5, 0.8, 0.9, 0.95, 1.0]))
        thr = tnr_threshold(scores, negatives, target)
        neg = np.sort(scores[negatives])
        achieved = float(np.mean(neg < thr))
        assert achieved >= target
        # Minimality: the next candidate threshold down fails the target.
        below = neg[neg < thr]
        distinct = np.unique(below)
        if distinct.size >= 2:
            lower = float(np.nextafter(distinct[-2], np.inf))
            assert float(np.mean(neg < lower)) < target


def test_tnr_threshold_validation():
    with pytest.raises(ValueError):
        tnr_threshold([0.1], [True], 0.0)
    with pytest.raises(ValueError):
        tnr_threshold([0.1], [False], 0.9)


def separable_training_set(seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    # Two symptom columns keyed to disjoint feature blocks.
    rng = np.random.default_rng(seed)
    n = 80
    X = np.zeros((n, 4))
    truth = np.zeros((n, 2), dtype=np.int8)
    for i in range(n):
        which = int(rng.integers(3))
        if which < 2:
            truth[i, which] = 1
            X[i, 2 * which : 2 * which + 2] = 1.0
        X[i] += rng.normal(scale=0.05, size=4)
    return X, truth


def test_all_modes_coincide_without_missing_labels():
    X, truth = separable_training_set()
    mask = make_mask(truth)
    config = TrainConfig(epochs=8, seed=5)
    models = {
        mode: train_relevance(X, mask, config, mode=mode) for mode in MODES
    }
    for mode in ("loss_mask", "label_enhance"):
        assert np.array_equal(models[mode].weights, models["naive_negative"].weights)
        assert np.array_equal(models[mode].bias, models["naive_negative"].bias)
    assert models["label_enhance"].mode == "label_enhance"


def test_naive_mode_equals_explicit_negatives():
    X, truth = separable_training_set(1)
    states = truth.astype(np.int8)
    states[10:30, 1] = MASK_MISSING
    explicit = states.copy()
    explicit[10:30, 1] = MASK_NEGATIVE
    config = TrainConfig(epochs=6, seed=2)
    naive = train_relevance(X, make_mask(states), config, mode="naive_negative")
    filled = train_relevance(X, make_mask(explicit), config, mode="naive_negative")
    assert np.array_equal(naive.weights, filled.weights)


def test_loss_mask_ignores_hidden_positives():
    # Hide most positives of symptom 2 from the mask; loss_mask must
    # not learn to score those rows low, unlike naive_negative.
    X, truth = separable_training_set(2)
    states = truth.astype(np.int8)
    positive_rows = np.flatnonzero(truth[:, 1] == 1)
    hidden = np.zeros(len(truth), dtype=bool)
    hidden[positive_rows[2:]] = True
    states[hidden, 1] = MASK_MISSING
    config = TrainConfig(epochs=12, seed=3)
    masked = train_relevance(X, make_mask(states), config, mode="loss_mask")
    naive = train_relevance(X, make_mask(states), config, mode="naive_negative")
    hidden_scores_masked = masked.predict(X)[hidden, 1]
    hidden_scores_naive = naive.predict(X)[hidden, 1]
    assert hidden_scores_masked.mean() > hidden_scores_naive.mean()


def test_train_relevance_rejects_unknown_mode():
    X, truth = separable_training_set()
    with pytest.raises(ValueError):
        train_relevance(X, make_mask(truth), TrainConfig(epochs=1), mode="optimistic")


def test_training_is_deterministic_per_seed():
    X, truth = separable_training_set(4)
    mask = make_mask(truth)
    a = train_relevance(X, mask, TrainConfig(epochs=5, seed=9))
    b = train_relevance(X, mask, TrainConfig(epochs=5, seed=9))
    c = train_relevance(X, mask, TrainConfig(epochs=5, seed=10))
    assert np.array_equal(a.weights, b.weights)
    assert not np.array_equal(a.weights, c.weights)


def test_single_class_columns_are_skipped_with_zero_scores():
    X, truth = separable_training_set(5)
    states = truth.astype(np.int8)
    states[:, 1] = MASK_NEGATIVE
    model = train_relevance(X, make_mask(states), TrainConfig(epochs=3))
    assert model.skipped == ("s2",)
    # A skipped column keeps zero weights, so it scores a flat 0.5.
    assert np.all(model.weights[1] == 0.0)
    assert np.all(model.predict(X)[:, 1] == 0.5)


def test_enhance_labels_converts_only_confident_missing_entries():
    X, truth = separable_training_set(6)
    states = truth.astype(np.int8)
    missing = np.zeros_like(truth, dtype=bool)
    missing[::3] = True
    states[missing] = MASK_MISSING
    teacher = train_relevance(X, make_mask(states), TrainConfig(epochs=10, seed=7))
    enhanced, report = enhance_labels(teacher, X, make_mask(states), target_tnr=0.9)
    probs = teacher.predict(X)
    for j, symptom in enumerate(("s1", "s2")):
        entry = report[symptom]
        thr = entry["threshold"]
        observed_neg = states[:, j] == MASK_NEGATIVE
        achieved = float(np.mean(probs[observed_neg, j] < thr))
        assert achieved == entry["achieved_tnr"]
        assert achieved >= 0.9
        was_missing = states[:, j] == MASK_MISSING
        converted = was_missing & (probs[:, j] < thr)
        assert int(converted.sum()) == entry["converted"]
        assert np.all(enhanced.states[converted, j] == MASK_NEGATIVE)
        kept = was_missing & ~converted
        assert np.all(enhanced.states[kept, j] == MASK_MISSING)
    # Observed entries are untouched.
    assert np.array_equal(
        enhanced.states[~missing], states[~missing]
    )


def test_enhance_labels_requires_loss_mask_teacher():
    X, truth = separable_training_set(7)
    mask = make_mask(truth)
    teacher = train_relevance(X, mask, TrainConfig(epochs=2), mode="naive_negative")
    with pytest.raises(ValueError):
        enhance_labels(teacher, X, mask)


def test_status_model_learns_monotone_targets():
    rng = np.random.default_rng(31)
    n = 120
    X = np.zeros((n, 3))
    q = np.zeros(n)
    for i in range(n):
        level = int(rng.integers(4))
        q[i] = level / 3
        X[i, 0] = level
        X[i, 1:] = rng.normal(scale=0.05, size=2)
    model = train_status(X, q, TrainConfig(epochs=25, seed=1))
    preds = model.predict(X)
    assert preds.shape == (n,)
    assert np.all((preds >= 0) & (preds <= 1))
    assert float(np.mean(np.abs(preds - q))) < float(np.mean(np.abs(q.mean() - q)))


def test_train_status_validates_targets():
    X = np.zeros((3, 2))
    with pytest.raises(SchemaError):
        train_status(X, [0.0, 0.5, 1.5], TrainConfig(epochs=1))
    with pytest.raises(SchemaError):
        train_status(X, [[0.0], [0.5], [1.0]], TrainConfig(epochs=1))


def test_model_files_round_trip(tmp_path):
    texts = ["sleep bad night", "food taste gone", "sleep gone", "night food"]
    vec = fit_tfidf(texts)
    X = vec.transform(texts)
    states = np.array([[1, 0], [0, 1], [1, 0], [0, 1]], dtype=np.int8)
    model = train_relevance(X, make_mask(states), TrainConfig(epochs=4, seed=0))
    path = tmp_path / "relevance.json"
    save_model(path, model, vec)
    loaded, vec2 = load_model(path)
    assert isinstance(loaded, RelevanceModel)
    assert loaded.symptom_ids == model.symptom_ids
    assert loaded.mode == model.mode
    assert np.array_equal(loaded.weights, model.weights)
    assert np.array_equal(loaded.bias, model.bias)
    assert np.array_equal(
        vec2.transform(["sleep night"]).toarray(), vec.transform(["sleep night"]).toarray()
    )

    status = train_status(X.toarray(), [0.0, 1 / 3, 2 / 3, 1.0], TrainConfig(epochs=4))
    spath = tmp_path / "status.json"
    save_model(spath, status, vec)
    sloaded, _ = load_model(spath)
    assert np.array_equal(sloaded.weights, status.weights)
    assert sloaded.bias == status.bias


def test_predictions_are_sigmoid_of_linear_scores():
    X, truth = separable_training_set(8)
    model = train_relevance(X, make_mask(truth), TrainConfig(epochs=3, seed=4))
    manual = expit(X @ model.weights.T + model.bias)
    assert model.predict(X) == pytest.approx(manual, abs=1e-15)
