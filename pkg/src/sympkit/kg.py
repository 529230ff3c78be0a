"""Bipartite disease-symptom knowledge graph: loading, validation, queries.

The graph file is UTF-8 JSON with top-level keys ``diseases`` (array of
``{id, name}``), ``symptoms`` (array of ``{id, name, sub_symptoms:
[{text, source}]}``) and ``edges`` (array of ``[disease_id,
symptom_id]`` pairs). Graphs are immutable after load and safe for
concurrent reads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError

SUB_SYMPTOM_SOURCES = ("manual", "questionnaire", "post")

_ID_RE = re.compile(r"^[a-z][a-z0-9_]*$")


def slugify(name: str) -> str:
    """Lowercase snake-case slug of a display name, usable as a node id."""
    slug = re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")
    if not slug:
        raise SchemaError(f"name {name!r} does not yield a usable id")
    return slug


@dataclass(frozen=True)
class SubSymptom:
    """One natural-language description of a symptom."""

    text: str
    source: str

    def __post_init__(self) -> None:
        if not self.text:
            raise SchemaError("sub-symptom text must be non-empty")
        if self.source not in SUB_SYMPTOM_SOURCES:
            raise SchemaError(
                f"sub-symptom source {self.source!r} not in {SUB_SYMPTOM_SOURCES}"
            )


@dataclass(frozen=True)
class Symptom:
    id: str
    name: str
    sub_symptoms: tuple[SubSymptom, ...]

    def __post_init__(self) -> None:
        if not _ID_RE.match(self.id):
            raise SchemaError(f"symptom id {self.id!r} is not a lowercase snake-case slug")
        if not self.sub_symptoms:
            raise SchemaError(f"symptom {self.id!r} has no sub-symptoms")


@dataclass(frozen=True)
class Disease:
    id: str
    name: str

    def __post_init__(self) -> None:
        if not _ID_RE.match(self.id):
            raise SchemaError(f"disease id {self.id!r} is not a lowercase snake-case slug")


@dataclass(frozen=True)
class KnowledgeGraph:
    """Validated bipartite graph between diseases and symptoms."""

    diseases: tuple[Disease, ...]
    symptoms: tuple[Symptom, ...]
    edges: frozenset[tuple[str, str]]
    _symptoms_of: dict[str, frozenset[str]] = field(repr=False, compare=False, default_factory=dict)
    _diseases_of: dict[str, frozenset[str]] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        disease_ids = [d.id for d in self.diseases]
        symptom_ids = [s.id for s in self.symptoms]
        for ids, kind in ((disease_ids, "disease"), (symptom_ids, "symptom")):
            seen: set[str] = set()
            for node_id in ids:
                if node_id in seen:
                    raise SchemaError(f"duplicate {kind} id {node_id!r}")
                seen.add(node_id)
        dset, sset = set(disease_ids), set(symptom_ids)
        fwd: dict[str, set[str]] = {d: set() for d in dset}
        rev: dict[str, set[str]] = {s: set() for s in sset}
        for d_id, s_id in self.edges:
            if d_id not in dset:
                raise SchemaError(f"edge ({d_id!r}, {s_id!r}) references unknown disease {d_id!r}")
            if s_id not in sset:
                raise SchemaError(f"edge ({d_id!r}, {s_id!r}) references unknown symptom {s_id!r}")
            fwd[d_id].add(s_id)
            rev[s_id].add(d_id)
        for d_id, linked in fwd.items():
            if not linked:
                raise SchemaError(f"disease {d_id!r} has no incident edges")
        for s_id, linked in rev.items():
            if not linked:
                raise SchemaError(f"symptom {s_id!r} has no incident edges")
        object.__setattr__(self, "_symptoms_of", {d: frozenset(v) for d, v in fwd.items()})
        object.__setattr__(self, "_diseases_of", {s: frozenset(v) for s, v in rev.items()})

    def disease(self, disease_id: str) -> Disease:
        for d in self.diseases:
            if d.id == disease_id:
                return d
        raise KeyError(f"unknown disease id {disease_id!r}")

    def symptom(self, symptom_id: str) -> Symptom:
        for s in self.symptoms:
            if s.id == symptom_id:
                return s
        raise KeyError(f"unknown symptom id {symptom_id!r}")

    def symptom_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.symptoms)


def typical_symptoms(kg: KnowledgeGraph, disease_id: str) -> frozenset[str]:
    """Symptom endpoints of all edges incident to ``disease_id``."""
    try:
        return kg._symptoms_of[disease_id]
    except KeyError:
        raise KeyError(f"unknown disease id {disease_id!r}") from None


def diseases_of(kg: KnowledgeGraph, symptom_id: str) -> frozenset[str]:
    """Disease endpoints of all edges incident to ``symptom_id``."""
    try:
        return kg._diseases_of[symptom_id]
    except KeyError:
        raise KeyError(f"unknown symptom id {symptom_id!r}") from None


def load_kg(path: str | Path) -> KnowledgeGraph:
    """Load and validate a knowledge-graph JSON file."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot parse knowledge graph {path}: {exc}") from exc
    return kg_from_dict(raw)


def kg_from_dict(raw: dict) -> KnowledgeGraph:
    if not isinstance(raw, dict):
        raise SchemaError("knowledge graph file must hold a JSON object")
    for key in ("diseases", "symptoms", "edges"):
        if key not in raw:
            raise SchemaError(f"knowledge graph is missing the {key!r} key")
    try:
        diseases = tuple(Disease(id=d["id"], name=d["name"]) for d in raw["diseases"])
        symptoms = tuple(
            Symptom(
                id=s["id"],
                name=s["name"],
                sub_symptoms=tuple(
                    SubSymptom(text=sub["text"], source=sub["source"])
                    for sub in s["sub_symptoms"]
                ),
            )
            for s in raw["symptoms"]
        )
        edges = frozenset((str(e[0]), str(e[1])) for e in raw["edges"])
    except (KeyError, TypeError, IndexError) as exc:
        raise SchemaError(f"malformed knowledge graph entry: {exc!r}") from exc
    return KnowledgeGraph(diseases=diseases, symptoms=symptoms, edges=edges)


def kg_to_dict(kg: KnowledgeGraph) -> dict:
    return {
        "diseases": [{"id": d.id, "name": d.name} for d in kg.diseases],
        "symptoms": [
            {
                "id": s.id,
                "name": s.name,
                "sub_symptoms": [{"text": sub.text, "source": sub.source} for sub in s.sub_symptoms],
            }
            for s in kg.symptoms
        ],
        "edges": sorted([d, s] for d, s in kg.edges),
    }


def save_kg(kg: KnowledgeGraph, path: str | Path) -> None:
    """Serialize so that ``load_kg(save_kg(kg))`` round-trips exactly."""
    Path(path).write_text(
        json.dumps(kg_to_dict(kg), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
