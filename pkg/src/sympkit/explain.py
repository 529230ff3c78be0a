"""Graph-grounded explanations and label audits for user-level predictions.

An explanation walks a disease's typical symptoms and shows which ones
the user's reweighted post features support, with the supporting posts
as evidence. Audits flag labeled diseases with next to no symptom
coverage (suspect false positives) and unlabeled diseases with high
coverage plus a confident detector (suspect false negatives).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classifier import RelevanceModel, StatusModel, TfidfVectorizer
from .errors import SchemaError
from .kg import KnowledgeGraph, typical_symptoms
from .mdd import MddModel, UserHistory, extract_features, feature_sequence

BINARIZE_THRESHOLD = 0.5
FP_COVERAGE_MAX = 0.2
FN_COVERAGE_MIN = 0.6
MODEL_PROB_MIN = 0.5
DEFAULT_EXCERPT_LEN = 80

PRESENT_MARK = "✓"
ABSENT_MARK = "✗"


@dataclass(frozen=True)
class SymptomEvidence:
    """Presence verdict for one symptom with its supporting posts.

    Evidence entries are (post index, reweighted value, excerpt),
    sorted by value descending; a symptom is present iff at least one
    post's reweighted feature reaches the threshold.
    """

    symptom_id: str
    present: bool
    evidence_posts: tuple[tuple[int, float, str], ...]

    def __post_init__(self) -> None:
        if self.present != bool(self.evidence_posts):
            raise SchemaError(
                f"symptom {self.symptom_id!r}: present flag contradicts evidence list"
            )
        values = [value for _, value, _ in self.evidence_posts]
        if values != sorted(values, reverse=True):
            raise SchemaError(f"symptom {self.symptom_id!r}: evidence not sorted by value")


@dataclass(frozen=True)
class Explanation:
    user_id: str
    disease_id: str
    typical: tuple[SymptomEvidence, ...]
    coverage: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.coverage <= 1.0:
            raise SchemaError("coverage out of [0, 1]")

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "disease_id": self.disease_id,
            "coverage": self.coverage,
            "typical": [
                {
                    "symptom_id": ev.symptom_id,
                    "present": ev.present,
                    "evidence": [
                        {"post": post, "value": value, "excerpt": excerpt}
                        for post, value, excerpt in ev.evidence_posts
                    ],
                }
                for ev in self.typical
            ],
        }


class AuditKind(enum.Enum):
    SUSPECT_FALSE_POSITIVE = "suspect_false_positive"
    SUSPECT_FALSE_NEGATIVE = "suspect_false_negative"


@dataclass(frozen=True)
class LabelAuditFlag:
    user_id: str
    disease_id: str
    kind: AuditKind
    coverage: float
    model_probability: float | None

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "disease_id": self.disease_id,
            "kind": self.kind.value,
            "coverage": self.coverage,
            "model_probability": self.model_probability,
        }


@dataclass(frozen=True)
class ExplainContext:
    """Everything needed to explain or audit a user."""

    kg: KnowledgeGraph
    relevance: RelevanceModel
    status: StatusModel
    vectorizer: TfidfVectorizer
    mdd_models: Mapping[str, MddModel] = field(default_factory=dict)
    threshold: float = BINARIZE_THRESHOLD
    excerpt_len: int = DEFAULT_EXCERPT_LEN
    fp_coverage_max: float = FP_COVERAGE_MAX
    fn_coverage_min: float = FN_COVERAGE_MIN
    extra_other_patterns: tuple[str, ...] = ()


def binarize(
    sequence: np.ndarray, threshold: float = BINARIZE_THRESHOLD
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Presence flags per symptom plus the post indices crossing the threshold.

    A symptom is present iff any post's value is >= threshold (0.5
    itself counts).
    """
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2:
        raise SchemaError("binarize expects a (posts, symptoms) matrix")
    crossing = seq >= threshold
    present = crossing.any(axis=0)
    supporters = [np.flatnonzero(crossing[:, j]) for j in range(seq.shape[1])]
    return present, supporters


def explain_user(user: UserHistory, disease_id: str, ctx: ExplainContext) -> Explanation:
    """Coverage of the disease's typical symptoms in the user's history."""
    typical = sorted(typical_symptoms(ctx.kg, disease_id))
    columns = {symptom: j for j, symptom in enumerate(ctx.relevance.symptom_ids)}
    missing = [symptom for symptom in typical if symptom not in columns]
    if missing:
        raise SchemaError(f"relevance model does not cover symptoms {missing}")
    features = extract_features(
        user, ctx.relevance, ctx.status, ctx.vectorizer,
        reweighting=True, extra_other_patterns=ctx.extra_other_patterns,
    )
    evidence_list: list[SymptomEvidence] = []
    n_present = 0
    for symptom in typical:
        j = columns[symptom]
        entries: list[tuple[int, float, str]] = []
        for index, pf in enumerate(features):
            value = float(pf.f_symp[j])
            if value >= ctx.threshold:
                excerpt = user.posts[index][: ctx.excerpt_len]
                entries.append((index, value, excerpt))
        entries.sort(key=lambda entry: (-entry[1], entry[0]))
        present = bool(entries)
        n_present += present
        evidence_list.append(
            SymptomEvidence(symptom_id=symptom, present=present, evidence_posts=tuple(entries))
        )
    coverage = n_present / len(typical)
    return Explanation(
        user_id=user.user_id,
        disease_id=disease_id,
        typical=tuple(evidence_list),
        coverage=coverage,
    )


def audit_labels(user: UserHistory, ctx: ExplainContext) -> list[LabelAuditFlag]:
    """Flag suspect labels for every disease in the graph.

    A labeled disease with coverage <= fp_coverage_max is a suspect
    false positive. An unlabeled disease with coverage >=
    fn_coverage_min whose detector is confident (probability >= 0.5)
    is a suspect false negative. The two flags are mutually exclusive
    per disease by construction.
    """
    flags: list[LabelAuditFlag] = []
    for disease in ctx.kg.diseases:
        explanation = explain_user(user, disease.id, ctx)
        labeled = bool(user.label.get(disease.id, False))
        probability: float | None = None
        model = ctx.mdd_models.get(disease.id)
        if model is not None:
            features = extract_features(
                user, ctx.relevance, ctx.status, ctx.vectorizer,
                reweighting=True, extra_other_patterns=ctx.extra_other_patterns,
            )
            probability = float(model.predict([feature_sequence(features)])[0])
        if labeled and explanation.coverage <= ctx.fp_coverage_max:
            flags.append(
                LabelAuditFlag(
                    user_id=user.user_id,
                    disease_id=disease.id,
                    kind=AuditKind.SUSPECT_FALSE_POSITIVE,
                    coverage=explanation.coverage,
                    model_probability=probability,
                )
            )
        elif (
            not labeled
            and explanation.coverage >= ctx.fn_coverage_min
            and probability is not None
            and probability >= MODEL_PROB_MIN
        ):
            flags.append(
                LabelAuditFlag(
                    user_id=user.user_id,
                    disease_id=disease.id,
                    kind=AuditKind.SUSPECT_FALSE_NEGATIVE,
                    coverage=explanation.coverage,
                    model_probability=probability,
                )
            )
    return flags


def explanation_to_text(explanation: Explanation, kg: KnowledgeGraph) -> str:
    """Aligned plain-text report: headline marks, coverage, then evidence."""
    disease = kg.disease(explanation.disease_id)
    marks = " ".join(
        f"{kg.symptom(ev.symptom_id).name} {PRESENT_MARK if ev.present else ABSENT_MARK}"
        for ev in explanation.typical
    )
    n_present = sum(1 for ev in explanation.typical if ev.present)
    lines = [
        f"User: {explanation.user_id}",
        f"Typical {disease.name} symptoms: {marks}",
        f"Coverage: {n_present}/{len(explanation.typical)} ({explanation.coverage:.2f})",
    ]
    cited = [ev for ev in explanation.typical if ev.evidence_posts]
    if cited:
        lines.append("Evidence:")
        width = max(len(kg.symptom(ev.symptom_id).name) for ev in cited)
        for ev in cited:
            name = kg.symptom(ev.symptom_id).name
            for post, value, excerpt in ev.evidence_posts:
                lines.append(f"  {name.ljust(width)}  post {post:>3}  {value:.4f}  {excerpt!r}")
    return "\n".join(lines) + "\n"


def save_explanations(
    explanations: Sequence[Explanation], kg: KnowledgeGraph,
    json_path: str | Path, text_path: str | Path,
) -> None:
    payload = [explanation.to_dict() for explanation in explanations]
    Path(json_path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    text = "\n".join(explanation_to_text(e, kg) for e in explanations)
    Path(text_path).write_text(text, encoding="utf-8")


def save_audit(flags: Sequence[LabelAuditFlag], path: str | Path) -> None:
    payload = [flag.to_dict() for flag in flags]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
