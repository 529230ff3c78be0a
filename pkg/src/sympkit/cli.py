"""Command-line runner for the pipeline stages.

Each subcommand reads one TOML config (see ``config``), writes its
artifacts into the configured output directory, and drops a manifest
recording the SHA-256 of every input and output next to them. All
stages are deterministic: rerunning a stage with unchanged inputs,
config, and seeds produces byte-identical files.

Anticipated failures (malformed inputs, impossible requests) exit with
status 2 and a one-line JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .annotations import build_gold, fleiss_kappa, load_annotations, load_gold, save_gold
from .classifier import (
    LabelMask,
    RelevanceModel,
    StatusModel,
    TfidfConfig,
    evaluate_relevance,
    evaluate_status,
    fit_tfidf,
    load_model,
    save_model,
    train_relevance,
    train_status,
)
from .config import PipelineConfig, load_config
from .corpus import (
    Sentence,
    clean_post,
    filter_diagnostic_posts,
    label_diagnosed_users,
    load_diagnosis_rule,
    load_posts,
    load_splits,
    sample_control_users,
    save_splits,
    split_dataset,
    split_sentences,
)
from .embed import embed_kg, hash_embed, load_embeddings, save_embeddings
from .errors import SchemaError, SympkitError
from .explain import (
    ExplainContext,
    audit_labels,
    explain_user,
    explanation_to_text,
    save_audit,
    save_explanations,
)
from .kg import KnowledgeGraph, load_kg, typical_symptoms
from .manifest import write_manifest
from .mdd import (
    MAX_POSTS,
    UserHistory,
    assemble_binary,
    eval_mdd,
    extract_features,
    feature_sequence,
    load_mdd_model,
    load_users,
    save_mdd_model,
    save_users,
    train_mdd,
)
from .retrieval import KeywordLexicon, candidate_queues, lsh_dedup
from .synth import write_fixtures

EVAL_SUITES = ("relevance", "status", "mdd")
RETRIEVE_ROUTES = ("embedding", "keyword")


def _checked_disease(kg: KnowledgeGraph, disease_id: str) -> str:
    known = {d.id for d in kg.diseases}
    if disease_id not in known:
        raise SchemaError(f"unknown disease {disease_id!r}; graph has {sorted(known)}")
    return disease_id


def _out_dir(cfg: PipelineConfig) -> Path:
    cfg.paths.out.mkdir(parents=True, exist_ok=True)
    return cfg.paths.out


def _corpus_sentences(cfg: PipelineConfig) -> list[Sentence]:
    """Cleaned, split sentences of the whole post corpus, in post order."""
    sentences: list[Sentence] = []
    for post in load_posts(cfg.paths.posts):
        sentences.extend(split_sentences(clean_post(post)))
    return sentences


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise SchemaError(f"missing {path.name}; run the {produced_by} stage first")
    return path


def _write_json(path: Path, payload: object) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _manifest(out: Path, stage: str, inputs: dict, outputs: dict, seeds: dict) -> None:
    write_manifest(out / f"manifest_{stage}.json", stage, inputs, outputs, seeds)


# ---------------------------------------------------------------------------
# Stage implementations


def cmd_validate_kg(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    kg = load_kg(cfg.paths.kg)
    out = _out_dir(cfg)
    report = {
        "n_diseases": len(kg.diseases),
        "n_symptoms": len(kg.symptoms),
        "n_edges": len(kg.edges),
        "typical_counts": {d.id: len(typical_symptoms(kg, d.id)) for d in kg.diseases},
        "sub_symptom_counts": {s.id: len(s.sub_symptoms) for s in kg.symptoms},
    }
    path = _write_json(out / "kg_report.json", report)
    _manifest(out, "validate-kg", {"kg": cfg.paths.kg}, {"report": path}, {})
    print(
        f"graph ok: {report['n_diseases']} diseases, {report['n_symptoms']} symptoms,"
        f" {report['n_edges']} edges"
    )
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    kg = load_kg(cfg.paths.kg)
    out = _out_dir(cfg)
    store = embed_kg(kg, cfg.retrieval.embedding_dim, cfg.retrieval.embedding_seed)
    path = out / "embeddings.tsv"
    save_embeddings(store, path)
    _manifest(
        out, "embed", {"kg": cfg.paths.kg}, {"embeddings": path},
        {"embedding": cfg.retrieval.embedding_seed},
    )
    print(f"embedded {len(store)} sub-symptom descriptions at dimension {store.dim}")
    return 0


def cmd_retrieve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    kg = load_kg(cfg.paths.kg)
    out = _out_dir(cfg)
    disease = _checked_disease(kg, args.disease)
    sentences = _corpus_sentences(cfg)
    typical = sorted(typical_symptoms(kg, disease))

    rows: list[tuple[str, str, float]] = []
    inputs: dict[str, Path] = {"kg": cfg.paths.kg, "posts": cfg.paths.posts}
    seeds: dict[str, int] = {}
    if args.route == "embedding":
        store = load_embeddings(_require(out / "embeddings.tsv", "embed"))
        inputs["embeddings"] = out / "embeddings.tsv"
        seeds["embedding"] = cfg.retrieval.embedding_seed
        pairs = [
            (s.id, hash_embed(s.text, store.dim, cfg.retrieval.embedding_seed))
            for s in sentences
        ]
        queues = candidate_queues(pairs, kg, disease, store, cfg.retrieval.capacity)
        for symptom_id in typical:
            for sentence_id, score in queues[symptom_id].entries():
                rows.append((symptom_id, sentence_id, score))
    else:
        for symptom_id in typical:
            lexicon_path = cfg.paths.lexicons / f"{symptom_id}.txt"
            if not lexicon_path.exists():
                raise SchemaError(f"no keyword lexicon at {lexicon_path.name}")
            inputs[f"lexicon_{symptom_id}"] = lexicon_path
            lexicon = KeywordLexicon.load(lexicon_path)
            matched = [s.id for s in sentences if lexicon.matches(s.text)]
            for sentence_id in matched[: cfg.retrieval.capacity]:
                rows.append((symptom_id, sentence_id, 1.0))

    path = out / f"candidates_{disease}.tsv"
    with open(path, "w", encoding="utf-8") as handle:
        for symptom_id, sentence_id, score in rows:
            handle.write(f"{symptom_id}\t{sentence_id}\t{score!r}\n")
    _manifest(out, f"retrieve-{disease}", inputs, {"candidates": path}, seeds)
    n_unique = len({sentence_id for _, sentence_id, _ in rows})
    print(
        f"{disease}: queued {len(rows)} (symptom, sentence) candidates"
        f" over {n_unique} sentences via the {args.route} route"
    )
    return 0


def _read_candidates(path: Path) -> list[tuple[str, str, str]]:
    rows = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise SchemaError(f"{path}:{lineno}: expected three TSV columns")
            rows.append((parts[0], parts[1], parts[2]))
    return rows


def cmd_dedup(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    kg = load_kg(cfg.paths.kg)
    out = _out_dir(cfg)
    disease = _checked_disease(kg, args.disease)
    cand_path = _require(out / f"candidates_{disease}.tsv", "retrieve")
    rows = _read_candidates(cand_path)
    texts = {s.id: s.text for s in _corpus_sentences(cfg)}

    candidate_ids = sorted({sentence_id for _, sentence_id, _ in rows})
    missing = [i for i in candidate_ids if i not in texts]
    if missing:
        raise SchemaError(f"candidate sentences missing from the corpus: {missing[:5]}")
    survivors = set(
        lsh_dedup(
            [(i, texts[i]) for i in candidate_ids],
            bands=cfg.retrieval.bands,
            rows=cfg.retrieval.rows,
            k=cfg.retrieval.num_hashes,
            seed=cfg.retrieval.dedup_seed,
            shingle_size=cfg.retrieval.shingle_size,
            threshold=cfg.retrieval.dedup_threshold,
        )
    )
    path = out / f"retained_{disease}.tsv"
    with open(path, "w", encoding="utf-8") as handle:
        for symptom_id, sentence_id, score in rows:
            if sentence_id in survivors:
                handle.write(f"{symptom_id}\t{sentence_id}\t{score}\n")
    _manifest(
        out, f"dedup-{disease}",
        {"candidates": cand_path, "posts": cfg.paths.posts},
        {"retained": path}, {"dedup": cfg.retrieval.dedup_seed},
    )
    print(
        f"{disease}: kept {len(survivors)} of {len(candidate_ids)} candidate sentences"
        f" after near-duplicate removal"
    )
    return 0


def cmd_label_users(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    kg = load_kg(cfg.paths.kg)
    out = _out_dir(cfg)
    posts = load_posts(cfg.paths.posts)
    rule = load_diagnosis_rule(cfg.paths.diagnosis_rule)
    labels, diagnostic_ids = label_diagnosed_users(posts, rule)
    kept = filter_diagnostic_posts(posts, diagnostic_ids)
    controls = sample_control_users(
        posts,
        set(cfg.controls.exclude_subreddits),
        cfg.controls.exclude_terms,
        cfg.controls.n_users,
        cfg.controls.seed,
    )
    controls -= set(labels)

    by_author: dict[str, list] = {}
    for post in kept:
        by_author.setdefault(post.author, []).append(post)
    for author_posts in by_author.values():
        author_posts.sort(key=lambda p: (p.created, p.id))

    disease_ids = [d.id for d in kg.diseases]
    users = []
    for author in sorted(labels):
        label = {d: d in labels[author] for d in disease_ids}
        texts = tuple(p.text for p in by_author.get(author, [])[:MAX_POSTS])
        users.append(UserHistory(author, texts, label))
    for author in sorted(controls):
        texts = tuple(p.text for p in by_author.get(author, [])[:MAX_POSTS])
        users.append(UserHistory(author, texts, {d: False for d in disease_ids}))

    path = out / "users_labeled.ndjson"
    save_users(users, path)
    _manifest(
        out, "label-users",
        {"posts": cfg.paths.posts, "diagnosis_rule": cfg.paths.diagnosis_rule},
        {"users": path}, {"controls": cfg.controls.seed},
    )
    print(f"labeled {len(labels)} self-reported users, sampled {len(controls)} controls")
    return 0


def cmd_merge_annotations(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg)
    records = load_annotations(cfg.paths.annotations)
    gold = build_gold(records)
    gold_path = out / "gold.json"
    save_gold(gold, gold_path)

    by_sentence: dict[str, list] = {}
    for record in records:
        by_sentence.setdefault(record.sentence_id, []).append(record)
    counts = Counter(len(group) for group in by_sentence.values())
    modal = max(counts, key=lambda n: (counts[n], n))

    symptom_ids = sorted({s for r in records for s in r.relevance})
    per_symptom: dict[str, float | None] = {}
    for symptom_id in symptom_ids:
        matrix = []
        for group in by_sentence.values():
            if len(group) != modal or any(symptom_id not in r.relevance for r in group):
                continue
            n_yes = sum(1 for r in group if r.relevance[symptom_id])
            matrix.append([modal - n_yes, n_yes])
        if len(matrix) < 2:
            per_symptom[symptom_id] = None
            continue
        kappa = fleiss_kappa(np.asarray(matrix), modal)
        per_symptom[symptom_id] = None if math.isnan(kappa) else kappa
    defined = [v for v in per_symptom.values() if v is not None]
    agreement = {
        "n_annotators": modal,
        "n_sentences": len(gold),
        "per_symptom_kappa": per_symptom,
        "mean_kappa": float(np.mean(defined)) if defined else None,
    }
    agreement_path = _write_json(out / "agreement.json", agreement)
    _manifest(
        out, "merge-annotations", {"annotations": cfg.paths.annotations},
        {"gold": gold_path, "agreement": agreement_path}, {},
    )
    mean_str = "n/a" if agreement["mean_kappa"] is None else f"{agreement['mean_kappa']:.3f}"
    print(f"merged {len(gold)} sentences from {modal} annotators, mean kappa {mean_str}")
    return 0


def _gold_and_texts(cfg: PipelineConfig) -> tuple[dict, dict[str, str]]:
    out = cfg.paths.out
    gold = load_gold(_require(out / "gold.json", "merge-annotations"))
    texts = {s.id: s.text for s in _corpus_sentences(cfg)}
    missing = sorted(set(gold) - set(texts))
    if missing:
        raise SchemaError(
            f"{len(missing)} annotated sentences not present in the corpus"
            f" (first: {missing[:3]})"
        )
    return gold, texts


def cmd_train_relevance(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    kg = load_kg(cfg.paths.kg)
    out = _out_dir(cfg)
    gold, texts = _gold_and_texts(cfg)

    ids = sorted(gold)
    assignment = split_dataset(ids, cfg.splits.ratios, cfg.splits.seed)
    splits_path = out / "splits.tsv"
    save_splits(assignment, splits_path)
    train_ids = [i for i in ids if assignment[i] == "train"]
    val_ids = [i for i in ids if assignment[i] == "validation"]
    if not train_ids:
        raise SchemaError("the training split is empty")

    symptom_ids = kg.symptom_ids()
    vectorizer = fit_tfidf(
        [texts[i] for i in train_ids], TfidfConfig(min_df=cfg.relevance.min_df)
    )
    features = vectorizer.transform([texts[i] for i in train_ids])
    mask = LabelMask.from_gold(gold, symptom_ids, train_ids)
    validation = None
    if val_ids:
        validation = (
            vectorizer.transform([texts[i] for i in val_ids]),
            LabelMask.from_gold(gold, symptom_ids, val_ids),
        )
    model = train_relevance(
        features, mask, cfg.relevance.train_config(),
        mode=cfg.relevance.mode, validation=validation,
        target_tnr=cfg.relevance.target_tnr,
    )
    model_path = out / "relevance_model.json"
    save_model(model_path, model, vectorizer)
    _manifest(
        out, "train-relevance",
        {"gold": out / "gold.json", "posts": cfg.paths.posts},
        {"model": model_path, "splits": splits_path},
        {"splits": cfg.splits.seed, "training": cfg.relevance.seed},
    )
    skipped = f", skipped {len(model.skipped)} single-class symptoms" if model.skipped else ""
    print(
        f"trained {cfg.relevance.mode} relevance model on {len(train_ids)} sentences"
        f" x {len(symptom_ids)} symptoms{skipped}"
    )
    return 0


def cmd_train_status(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg)
    gold, texts = _gold_and_texts(cfg)
    splits = load_splits(_require(out / "splits.tsv", "train-relevance"))
    _, vectorizer = load_model(_require(out / "relevance_model.json", "train-relevance"))

    def rows(split: str) -> list[str]:
        return [
            i for i in sorted(gold)
            if splits.get(i) == split and gold[i].status_applicable
        ]

    train_ids = rows("train")
    if not train_ids:
        raise SchemaError("no training sentences carry a certainty target")
    val_ids = rows("validation")
    features = vectorizer.transform([texts[i] for i in train_ids])
    targets = np.array([gold[i].status_q for i in train_ids])
    validation = None
    if val_ids:
        validation = (
            vectorizer.transform([texts[i] for i in val_ids]),
            np.array([gold[i].status_q for i in val_ids]),
        )
    model = train_status(features, targets, cfg.status.train_config(), validation)
    model_path = out / "status_model.json"
    save_model(model_path, model, vectorizer)
    _manifest(
        out, "train-status",
        {"gold": out / "gold.json", "posts": cfg.paths.posts, "splits": out / "splits.tsv"},
        {"model": model_path},
        {"training": cfg.status.seed},
    )
    print(f"trained certainty model on {len(train_ids)} sentences")
    return 0


def _load_relevance(out: Path) -> tuple[RelevanceModel, object]:
    model, vectorizer = load_model(_require(out / "relevance_model.json", "train-relevance"))
    if not isinstance(model, RelevanceModel):
        raise SchemaError("relevance_model.json does not hold a relevance model")
    return model, vectorizer


def _load_status(out: Path) -> StatusModel:
    model, _ = load_model(_require(out / "status_model.json", "train-status"))
    if not isinstance(model, StatusModel):
        raise SchemaError("status_model.json does not hold a certainty model")
    return model


def _user_sequences(
    users: list[UserHistory], out: Path
) -> tuple[dict[str, np.ndarray], RelevanceModel, StatusModel, object]:
    relevance, vectorizer = _load_relevance(out)
    status = _load_status(out)
    sequences = {
        user.user_id: feature_sequence(
            extract_features(user, relevance, status, vectorizer)
        )
        for user in users
    }
    return sequences, relevance, status, vectorizer


def cmd_train_mdd(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    kg = load_kg(cfg.paths.kg)
    out = _out_dir(cfg)
    disease = _checked_disease(kg, args.disease)
    users = load_users(cfg.paths.users)
    sequences, _, _, _ = _user_sequences(users, out)
    seqs, labels, ids = assemble_binary(users, sequences, disease)
    if not ids:
        raise SchemaError(f"no users are usable for the {disease} task")

    strata = {uid: ("pos" if flag else "ctl") for uid, flag in zip(ids, labels)}
    assignment = split_dataset(sorted(ids), cfg.splits.ratios, cfg.splits.seed, strata)
    splits_path = out / f"user_splits_{disease}.tsv"
    save_splits(assignment, splits_path)

    def subset(split: str) -> tuple[list[np.ndarray], np.ndarray]:
        picked = [k for k, uid in enumerate(ids) if assignment[uid] == split]
        return [seqs[k] for k in picked], labels[[k for k in picked]]

    train_seqs, train_labels = subset("train")
    val_seqs, val_labels = subset("validation")
    validation = None
    if len(val_labels) and val_labels.any() and not val_labels.all():
        validation = (val_seqs, val_labels)
    model = train_mdd(
        train_seqs, train_labels, cfg.mdd.variant, cfg.mdd.train_config(),
        validation, tuple(cfg.mdd.kernel_sizes), cfg.mdd.channels,
    )
    model_path = out / f"mdd_{disease}.json"
    save_mdd_model(model_path, model)
    _manifest(
        out, f"train-mdd-{disease}",
        {
            "users": cfg.paths.users,
            "relevance_model": out / "relevance_model.json",
            "status_model": out / "status_model.json",
        },
        {"model": model_path, "user_splits": splits_path},
        {"splits": cfg.splits.seed, "training": cfg.mdd.seed},
    )
    print(
        f"trained {cfg.mdd.variant} detector for {disease} on"
        f" {int(train_labels.sum())} positive / {int((~train_labels).sum())} control users"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg)
    if args.suite == "relevance":
        gold, texts = _gold_and_texts(cfg)
        splits = load_splits(_require(out / "splits.tsv", "train-relevance"))
        model, vectorizer = _load_relevance(out)
        test_ids = [i for i in sorted(gold) if splits.get(i) == "test"]
        if not test_ids:
            raise SchemaError("the test split is empty")
        features = vectorizer.transform([texts[i] for i in test_ids])
        mask = LabelMask.from_gold(gold, model.symptom_ids, test_ids)
        metrics = evaluate_relevance(model, features, mask)
        path = _write_json(out / "metrics_relevance.json", metrics.to_dict())
        _manifest(
            out, "evaluate-relevance",
            {"gold": out / "gold.json", "model": out / "relevance_model.json"},
            {"metrics": path}, {},
        )
        print(
            f"relevance: macro AUC {metrics.macro_auc:.4f},"
            f" macro F1 {metrics.macro_f1:.4f} on {len(test_ids)} sentences"
        )
    elif args.suite == "status":
        gold, texts = _gold_and_texts(cfg)
        splits = load_splits(_require(out / "splits.tsv", "train-relevance"))
        model = _load_status(out)
        _, vectorizer = load_model(out / "status_model.json")
        test_ids = [
            i for i in sorted(gold)
            if splits.get(i) == "test" and gold[i].status_applicable
        ]
        if not test_ids:
            raise SchemaError("no test sentences carry a certainty target")
        features = vectorizer.transform([texts[i] for i in test_ids])
        targets = np.array([gold[i].status_q for i in test_ids])
        metrics = evaluate_status(model, features, targets)
        path = _write_json(out / "metrics_status.json", metrics.to_dict())
        _manifest(
            out, "evaluate-status",
            {"gold": out / "gold.json", "model": out / "status_model.json"},
            {"metrics": path}, {},
        )
        print(
            f"certainty: MAE {metrics.mae:.4f} vs constant-mean baseline"
            f" {metrics.baseline_mae:.4f} on {len(test_ids)} sentences"
        )
    else:
        kg = load_kg(cfg.paths.kg)
        users = load_users(cfg.paths.users)
        sequences, _, _, _ = _user_sequences(users, out)
        models = {}
        test_sets = {}
        inputs: dict[str, Path] = {"users": cfg.paths.users}
        for d in sorted(dd.id for dd in kg.diseases):
            model_path = out / f"mdd_{d}.json"
            if not model_path.exists():
                continue
            seqs, labels, ids = assemble_binary(users, sequences, d)
            assignment = load_splits(_require(out / f"user_splits_{d}.tsv", "train-mdd"))
            picked = [k for k, uid in enumerate(ids) if assignment.get(uid) == "test"]
            models[d] = load_mdd_model(model_path)
            test_sets[d] = ([seqs[k] for k in picked], labels[picked])
            inputs[f"model_{d}"] = model_path
        if not models:
            raise SchemaError("no trained detector found; run train-mdd first")
        metrics = eval_mdd(models, test_sets)
        path = _write_json(out / "metrics_mdd.json", metrics.to_dict())
        _manifest(out, "evaluate-mdd", inputs, {"metrics": path}, {})
        print(
            f"detection: macro F1 {metrics.macro_f1:.4f}"
            f" over {len(metrics.per_disease_f1)} diseases"
        )
    return 0


def _explain_context(cfg: PipelineConfig, kg: KnowledgeGraph) -> ExplainContext:
    out = cfg.paths.out
    relevance, vectorizer = _load_relevance(out)
    status = _load_status(out)
    mdd_models = {}
    for d in (dd.id for dd in kg.diseases):
        model_path = out / f"mdd_{d}.json"
        if model_path.exists():
            mdd_models[d] = load_mdd_model(model_path)
    return ExplainContext(
        kg=kg,
        relevance=relevance,
        status=status,
        vectorizer=vectorizer,
        mdd_models=mdd_models,
        fp_coverage_max=cfg.audit.fp_coverage_max,
        fn_coverage_min=cfg.audit.fn_coverage_min,
    )


def _find_user(users: list[UserHistory], user_id: str) -> UserHistory:
    for user in users:
        if user.user_id == user_id:
            return user
    raise SchemaError(f"no user {user_id!r} in the user file")


def cmd_explain(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    kg = load_kg(cfg.paths.kg)
    out = _out_dir(cfg)
    disease = _checked_disease(kg, args.disease)
    user = _find_user(load_users(cfg.paths.users), args.user)
    ctx = _explain_context(cfg, kg)
    explanation = explain_user(user, disease, ctx)
    json_path = out / f"explanation_{args.user}_{disease}.json"
    text_path = out / f"explanation_{args.user}_{disease}.txt"
    save_explanations([explanation], kg, json_path, text_path)
    _manifest(
        out, f"explain-{args.user}-{disease}",
        {
            "users": cfg.paths.users,
            "relevance_model": out / "relevance_model.json",
            "status_model": out / "status_model.json",
        },
        {"explanation_json": json_path, "explanation_text": text_path}, {},
    )
    print(explanation_to_text(explanation, kg), end="")
    return 0


def cmd_audit(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    kg = load_kg(cfg.paths.kg)
    out = _out_dir(cfg)
    users = load_users(cfg.paths.users)
    ctx = _explain_context(cfg, kg)
    flags = []
    for user in users:
        flags.extend(audit_labels(user, ctx))
    flags.sort(key=lambda f: (f.user_id, f.disease_id))
    path = out / "audit_flags.json"
    save_audit(flags, path)
    _manifest(
        out, "audit",
        {
            "users": cfg.paths.users,
            "relevance_model": out / "relevance_model.json",
            "status_model": out / "status_model.json",
        },
        {"flags": path}, {},
    )
    kinds = Counter(f.kind.value for f in flags)
    summary = ", ".join(f"{k}: {v}" for k, v in sorted(kinds.items())) or "none"
    print(f"audited {len(users)} users; flags: {summary}")
    return 0


def cmd_synth_fixtures(args: argparse.Namespace) -> int:
    summary = write_fixtures(args.out, args.seed)
    root = summary.root
    write_manifest(
        root / "manifest_synth-fixtures.json", "synth-fixtures", {},
        {rel: root / rel for rel in summary.files}, {"world": args.seed},
    )
    print(f"wrote {len(summary.files)} fixture files under {root}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sympkit",
        description=(
            "Symptom-grounded pipeline: retrieval, annotation merging, relevance"
            " and certainty models, per-user disease detection, explanations."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def stage(name: str, help_text: str, func, disease: bool = False, config: bool = True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        if config:
            p.add_argument("--config", required=True, help="path to the pipeline TOML config")
        if disease:
            p.add_argument("--disease", required=True, help="disease id from the graph")
        p.set_defaults(func=func)
        return p

    stage("validate-kg", "Check the disease-symptom graph and write a report.", cmd_validate_kg)
    stage("embed", "Hash-embed every sub-symptom description.", cmd_embed)
    p = stage(
        "retrieve", "Fill per-symptom candidate queues for one disease.",
        cmd_retrieve, disease=True,
    )
    p.add_argument(
        "--route", choices=RETRIEVE_ROUTES, default="embedding",
        help="similarity route: hashed embeddings or keyword lexicons",
    )
    stage(
        "dedup", "Drop near-duplicate candidate sentences for one disease.",
        cmd_dedup, disease=True,
    )
    stage(
        "label-users", "Label self-reported diagnosed users and sample controls.",
        cmd_label_users,
    )
    stage(
        "merge-annotations", "Merge annotator TSV rows into gold labels and agreement.",
        cmd_merge_annotations,
    )
    stage("train-relevance", "Train the sentence-to-symptom relevance model.", cmd_train_relevance)
    stage("train-status", "Train the annotator-certainty model.", cmd_train_status)
    stage(
        "train-mdd", "Train the per-disease user-level detector.",
        cmd_train_mdd, disease=True,
    )
    p = stage("evaluate", "Score a trained model suite on its test split.", cmd_evaluate)
    p.add_argument("--suite", choices=EVAL_SUITES, required=True)
    p = stage(
        "explain", "Explain one user's typical-symptom coverage for one disease.",
        cmd_explain, disease=True,
    )
    p.add_argument("--user", required=True, help="user id from the user file")
    stage("audit", "Flag users whose labels disagree with symptom coverage.", cmd_audit)
    p = stage(
        "synth-fixtures", "Generate a complete synthetic input tree.",
        cmd_synth_fixtures, config=False,
    )
    p.add_argument("--out", required=True, help="directory to create the fixture tree in")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SympkitError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
