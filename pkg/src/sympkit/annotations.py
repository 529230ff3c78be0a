"""Multi-annotator labels: merging, agreement, and quality scoring.

Labels live at sentence granularity. Each annotator marks, for every
typical symptom of the queue's disease, whether the sentence concerns
it, plus one sentence-level status (True or Uncertain) whenever at
least one mark is positive. Symptoms outside the queue are missing,
not negative; downstream training must respect that distinction.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SchemaError

DEFAULT_N_ANNOTATORS = 3
DEFAULT_BETA = 2.0
PASS_SCORE = 75.0
REJECT_SCORE = 60.0


class Status(enum.Enum):
    """Sentence-level polarity for relevant symptoms."""

    TRUE = "T"
    UNCERTAIN = "U"


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's marks on one sentence."""

    sentence_id: str
    annotator_id: str
    relevance: dict[str, bool]
    status: Status | None = None

    def __post_init__(self) -> None:
        if not self.relevance:
            raise SchemaError(
                f"annotation {self.sentence_id!r}/{self.annotator_id!r} has no symptom marks"
            )
        any_positive = any(self.relevance.values())
        if any_positive and self.status is None:
            raise SchemaError(
                f"annotation {self.sentence_id!r}/{self.annotator_id!r} marks a symptom "
                "relevant but carries no status"
            )
        if not any_positive and self.status is not None:
            raise SchemaError(
                f"annotation {self.sentence_id!r}/{self.annotator_id!r} carries a status "
                "but marks nothing relevant"
            )


@dataclass(frozen=True)
class GoldLabel:
    """Merged per-sentence label with its observed-symptom mask."""

    sentence_id: str
    relevant: frozenset[str]
    observed: frozenset[str]
    status_q: float
    n_annotators: int = DEFAULT_N_ANNOTATORS

    def __post_init__(self) -> None:
        if not self.relevant <= self.observed:
            raise SchemaError(
                f"gold label {self.sentence_id!r}: relevant symptoms not within observed set"
            )
        if not 0.0 <= self.status_q <= 1.0:
            raise SchemaError(f"gold label {self.sentence_id!r}: status_q out of [0, 1]")

    @property
    def status_applicable(self) -> bool:
        return bool(self.relevant)


@dataclass(frozen=True)
class QualityScore:
    f_beta: float
    beta: float = DEFAULT_BETA

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise SchemaError("beta must be positive")

    @property
    def passes(self) -> bool:
        return self.f_beta >= PASS_SCORE

    @property
    def rejected(self) -> bool:
        return self.f_beta < REJECT_SCORE


def merge_relevance(records: Sequence[AnnotationRecord]) -> tuple[frozenset[str], frozenset[str]]:
    """Union-merge positive marks; any single positive vote makes a symptom relevant.

    Returns (relevant, observed). All records must cover the same
    sentence and the same symptom key set.
    """
    if not records:
        raise SchemaError("cannot merge an empty record list")
    sentence_id = records[0].sentence_id
    observed = frozenset(records[0].relevance)
    for record in records:
        if record.sentence_id != sentence_id:
            raise SchemaError(
                f"records mix sentences {sentence_id!r} and {record.sentence_id!r}"
            )
        if frozenset(record.relevance) != observed:
            raise SchemaError(
                f"annotator {record.annotator_id!r} observed a different symptom set "
                f"on {sentence_id!r}"
            )
    relevant = frozenset(
        symptom
        for record in records
        for symptom, positive in record.relevance.items()
        if positive
    )
    return relevant, observed


def merge_status(records: Sequence[AnnotationRecord]) -> float:
    """Fraction of status-carrying annotators who voted Uncertain.

    Sentences nobody marked relevant have no status votes; the target
    is 0 there and flagged inapplicable on the merged label.
    """
    votes = [record.status for record in records if record.status is not None]
    if not votes:
        return 0.0
    uncertain = sum(1 for vote in votes if vote is Status.UNCERTAIN)
    return uncertain / len(votes)


def merge_gold(
    records: Sequence[AnnotationRecord], n_annotators: int = DEFAULT_N_ANNOTATORS
) -> GoldLabel:
    relevant, observed = merge_relevance(records)
    return GoldLabel(
        sentence_id=records[0].sentence_id,
        relevant=relevant,
        observed=observed,
        status_q=merge_status(records),
        n_annotators=n_annotators,
    )


def build_gold(
    records: Sequence[AnnotationRecord], n_annotators: int = DEFAULT_N_ANNOTATORS
) -> dict[str, GoldLabel]:
    """Merge a full record list into per-sentence gold labels."""
    by_sentence: dict[str, list[AnnotationRecord]] = {}
    for record in records:
        by_sentence.setdefault(record.sentence_id, []).append(record)
    return {
        sentence_id: merge_gold(group, n_annotators)
        for sentence_id, group in by_sentence.items()
    }


def sentence_status_from_symptom_status(per_symptom: Mapping[str, Status]) -> Status:
    """Collapse symptom-level statuses: any Uncertain makes the sentence Uncertain."""
    if not per_symptom:
        raise SchemaError("no symptom statuses to collapse")
    if any(status is Status.UNCERTAIN for status in per_symptom.values()):
        return Status.UNCERTAIN
    return Status.TRUE


def fleiss_kappa(matrix: np.ndarray | Sequence[Sequence[int]], n: int) -> float:
    """Chance-corrected agreement for n raters over categorical items.

    ``matrix`` is items x categories vote counts, each row summing to
    n. Returns exactly 1.0 on perfect agreement and NaN when expected
    agreement is already 1 (a single category used throughout).
    """
    counts = np.asarray(matrix, dtype=float)
    if counts.ndim != 2 or counts.shape[0] < 2:
        raise SchemaError("agreement matrix needs >=2 items (rows)")
    if n < 2:
        raise SchemaError("agreement needs >=2 raters")
    row_sums = counts.sum(axis=1)
    if not np.all(row_sums == n):
        bad = int(np.flatnonzero(row_sums != n)[0])
        raise SchemaError(f"row {bad} sums to {row_sums[bad]:g}, expected {n}")
    items = counts.shape[0]
    p_item = ((counts * counts).sum(axis=1) - n) / (n * (n - 1))
    p_bar = float(p_item.mean())
    p_cat = counts.sum(axis=0) / (items * n)
    p_e = float((p_cat * p_cat).sum())
    if 1.0 - p_e <= 0.0:
        return math.nan
    if p_bar == 1.0:
        return 1.0
    return (p_bar - p_e) / (1.0 - p_e)


def quality_score(
    candidate: Mapping[str, bool],
    reference: Mapping[str, bool],
    beta: float = DEFAULT_BETA,
) -> QualityScore:
    """Recall-weighted micro F-beta between two mark sets, scaled to [0, 100]."""
    if beta <= 0:
        raise SchemaError("beta must be positive")
    if set(candidate) != set(reference):
        raise SchemaError("candidate and reference marks cover different keys")
    tp = sum(1 for key, value in candidate.items() if value and reference[key])
    fp = sum(1 for key, value in candidate.items() if value and not reference[key])
    fn = sum(1 for key, value in candidate.items() if not value and reference[key])
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    denom = beta * beta * precision + recall
    f_beta = (1 + beta * beta) * precision * recall / denom if denom else 0.0
    return QualityScore(f_beta=100.0 * f_beta, beta=beta)


# ---------------------------------------------------------------------------
# File formats

_STATUS_BY_LETTER = {"T": Status.TRUE, "U": Status.UNCERTAIN}


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Read annotation TSV rows (sentence, annotator, symptom, relevant, status).

    The status column may be filled per relevant symptom row; rows of
    one annotator collapse to a sentence-level status by the
    any-Uncertain rule.
    """
    marks: dict[tuple[str, str], dict[str, bool]] = {}
    statuses: dict[tuple[str, str], dict[str, Status]] = {}
    order: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) == 4:
                parts.append("")
            if len(parts) != 5:
                raise SchemaError(f"{path}:{lineno}: expected 5 TSV columns")
            sentence_id, annotator_id, symptom_id, relevant, status = parts
            if relevant not in {"0", "1"}:
                raise SchemaError(f"{path}:{lineno}: relevant must be 0 or 1")
            if status and status not in _STATUS_BY_LETTER:
                raise SchemaError(f"{path}:{lineno}: status must be T, U, or empty")
            key = (sentence_id, annotator_id)
            if key not in marks:
                marks[key] = {}
                statuses[key] = {}
                order.append(key)
            if symptom_id in marks[key]:
                raise SchemaError(
                    f"{path}:{lineno}: duplicate mark for symptom {symptom_id!r}"
                )
            marks[key][symptom_id] = relevant == "1"
            if status:
                statuses[key][symptom_id] = _STATUS_BY_LETTER[status]
    records = []
    for key in order:
        sentence_id, annotator_id = key
        status = (
            sentence_status_from_symptom_status(statuses[key]) if statuses[key] else None
        )
        records.append(
            AnnotationRecord(
                sentence_id=sentence_id,
                annotator_id=annotator_id,
                relevance=marks[key],
                status=status,
            )
        )
    return records


def save_annotations(records: Iterable[AnnotationRecord], path: str | Path) -> None:
    rows = []
    for record in records:
        for symptom_id in sorted(record.relevance):
            positive = record.relevance[symptom_id]
            letter = record.status.value if positive and record.status else ""
            rows.append(
                (record.sentence_id, record.annotator_id, symptom_id, int(positive), letter)
            )
    rows.sort()
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write("\t".join(str(cell) for cell in row) + "\n")


def save_gold(gold: Mapping[str, GoldLabel], path: str | Path) -> None:
    payload = {
        sentence_id: {
            "relevant": sorted(label.relevant),
            "observed": sorted(label.observed),
            "status_q": label.status_q,
        }
        for sentence_id, label in gold.items()
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_gold(path: str | Path) -> dict[str, GoldLabel]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return {
            sentence_id: GoldLabel(
                sentence_id=sentence_id,
                relevant=frozenset(entry["relevant"]),
                observed=frozenset(entry["observed"]),
                status_q=float(entry["status_q"]),
            )
            for sentence_id, entry in payload.items()
        }
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"cannot parse gold file {path}: {exc!r}") from exc
