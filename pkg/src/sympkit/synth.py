"""Deterministic synthetic worlds for exercising the whole pipeline.

A world is a small disease-symptom graph plus three disjoint token
vocabularies: keyword tokens (the only ones keyword lexicons know
about), paraphrase tokens (appear in symptom descriptions but in no
lexicon), and filler tokens (appear in neither). Every token is six
characters and sentences join tokens with single spaces, so a keyword
can never arise as a substring of unrelated text and character-gram
similarity between a sentence and a symptom description is driven
entirely by intentional token overlap.

The corpus generators keep full ground truth next to the text they
emit, which lets benchmarks score retrieval and training behaviour
against labels no real annotation process could provide.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import AnnotationRecord, Status, save_annotations
from .classifier import MASK_MISSING, LabelMask
from .corpus import RawPost, save_posts
from .errors import SchemaError
from .kg import Disease, KnowledgeGraph, SubSymptom, Symptom, save_kg, typical_symptoms
from .mdd import UserHistory, save_users

_CONSONANTS = "bdfglmnprstvz"
_VOWELS = "aeiou"
_SYLLABLES = tuple(c + v for c in _CONSONANTS for v in _VOWELS)

HEDGES = ("maybe", "perhaps", "possibly", "unsure", "might", "guess")

DEFAULT_N_SENTENCES = 2000
DEFAULT_LEAK_PROB = 0.3
DEFAULT_ANNOTATED_FRACTION = 0.35
DEFAULT_ANNOTATORS = 3


@dataclass(frozen=True)
class WorldSpec:
    """Size knobs for a synthetic world."""

    n_diseases: int = 4
    n_symptoms: int = 12
    symptoms_per_disease: int = 5
    keywords_per_symptom: int = 3
    paraphrases_per_symptom: int = 3
    n_fillers: int = 300
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_diseases < 2:
            raise SchemaError("a world needs at least two diseases")
        if self.n_symptoms < self.symptoms_per_disease:
            raise SchemaError("symptoms_per_disease exceeds the symptom count")
        if self.keywords_per_symptom < 3 or self.paraphrases_per_symptom < 3:
            raise SchemaError("each symptom needs at least three keywords and paraphrases")
        if self.n_fillers < 20:
            raise SchemaError("worlds need a filler vocabulary of at least 20 tokens")


@dataclass(frozen=True)
class World:
    """A generated graph plus the vocabularies its corpora are built from."""

    spec: WorldSpec
    kg: KnowledgeGraph
    keywords: dict[str, tuple[str, ...]]
    paraphrases: dict[str, tuple[str, ...]]
    fillers: tuple[str, ...]

    @property
    def disease_ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.kg.diseases)

    @property
    def symptom_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.kg.symptoms)

    @property
    def shared_symptom_fraction(self) -> float:
        """Fraction of symptoms typical for two or more diseases."""
        counts = {s.id: 0 for s in self.kg.symptoms}
        for _, symptom_id in self.kg.edges:
            counts[symptom_id] += 1
        shared = sum(1 for c in counts.values() if c >= 2)
        return shared / len(counts)

    def symptom_tokens(self, symptom_id: str) -> tuple[str, ...]:
        return self.keywords[symptom_id] + self.paraphrases[symptom_id]


def _token_pool(n: int, rng: np.random.Generator) -> list[str]:
    """n distinct six-character tokens, three syllables each."""
    space = len(_SYLLABLES) ** 3
    if n > space:
        raise SchemaError(f"cannot draw {n} distinct tokens from a pool of {space}")
    codes = rng.choice(space, size=n, replace=False)
    base = len(_SYLLABLES)
    out = []
    for code in codes:
        code = int(code)
        out.append(
            _SYLLABLES[code % base]
            + _SYLLABLES[(code // base) % base]
            + _SYLLABLES[code // (base * base)]
        )
    return out


def make_world(spec: WorldSpec = WorldSpec()) -> World:
    """Build the graph and vocabularies for a world specification.

    Disease d's typical symptoms form a contiguous window (mod S) of the
    symptom list, and the windows of consecutive diseases overlap, so a
    meaningful share of symptoms is typical for more than one disease.
    """
    rng = np.random.default_rng(spec.seed)
    n_kw = spec.n_symptoms * spec.keywords_per_symptom
    n_para = spec.n_symptoms * spec.paraphrases_per_symptom
    pool = _token_pool(n_kw + n_para + spec.n_fillers, rng)
    keywords: dict[str, tuple[str, ...]] = {}
    paraphrases: dict[str, tuple[str, ...]] = {}
    symptoms = []
    for i in range(spec.n_symptoms):
        sid = f"s{i + 1:02d}"
        kw = tuple(pool[i * spec.keywords_per_symptom : (i + 1) * spec.keywords_per_symptom])
        para = tuple(
            pool[n_kw + i * spec.paraphrases_per_symptom : n_kw + (i + 1) * spec.paraphrases_per_symptom]
        )
        keywords[sid] = kw
        paraphrases[sid] = para
        symptoms.append(
            Symptom(
                id=sid,
                name=f"Symptom {i + 1:02d}",
                sub_symptoms=(
                    SubSymptom(f"{kw[0]} {kw[1]} with {para[0]} {para[1]}", "manual"),
                    SubSymptom(f"often {kw[2]} or {para[1]} {para[2]}", "questionnaire"),
                    SubSymptom(f"{para[0]} {para[2]} and {kw[0]} daily", "post"),
                ),
            )
        )
    fillers = tuple(pool[n_kw + n_para :])

    diseases = []
    edges = set()
    stride = max(1, spec.n_symptoms // spec.n_diseases)
    for d in range(spec.n_diseases):
        did = f"d{d + 1}"
        diseases.append(Disease(id=did, name=f"Condition {chr(ord('A') + d)}"))
        start = d * stride
        for offset in range(spec.symptoms_per_disease):
            sid = symptoms[(start + offset) % spec.n_symptoms].id
            edges.add((did, sid))
    kg = KnowledgeGraph(
        diseases=tuple(diseases), symptoms=tuple(symptoms), edges=frozenset(edges)
    )
    return World(
        spec=spec, kg=kg, keywords=keywords, paraphrases=paraphrases, fillers=fillers
    )


@dataclass(frozen=True)
class RelevanceCorpus:
    """Sentences with full symptom truth plus a simulated annotation pass.

    ``observed`` marks the symptom columns an annotator was ever asked
    about for that sentence (the typical symptoms of the queue disease);
    ``truth`` is complete and may be positive outside the observed
    columns. ``status_q`` is the fraction of Uncertain votes among the
    annotators and is NaN for sentences with no relevant symptom.
    """

    symptom_ids: tuple[str, ...]
    sentence_ids: tuple[str, ...]
    texts: tuple[str, ...]
    queue_disease: tuple[str, ...]
    truth: np.ndarray
    observed: np.ndarray
    annotated: np.ndarray
    hedge_levels: np.ndarray
    votes: np.ndarray
    status_q: np.ndarray

    def __len__(self) -> int:
        return len(self.sentence_ids)


def generate_relevance_corpus(
    world: World,
    n_sentences: int = DEFAULT_N_SENTENCES,
    seed: int = 0,
    leak_prob: float = DEFAULT_LEAK_PROB,
    annotated_fraction: float = DEFAULT_ANNOTATED_FRACTION,
    n_annotators: int = DEFAULT_ANNOTATORS,
    mention_tokens: int = 1,
    confuse_prob: float = 0.0,
) -> RelevanceCorpus:
    """Sample sentences routed through per-disease candidate queues.

    Each sentence is assigned a queue disease and mentions zero, one or
    two of that disease's typical symptoms. Short sentences (terse
    asides) additionally mention symptoms outside the queue with
    probability ``leak_prob`` per slot (five slots); those mentions
    stay invisible to the simulated annotators and therefore produce
    hidden positives. Long sentences instead drag in, per in-queue
    mention with probability ``confuse_prob``, one token of the next
    symptom in the list without making that symptom true, which plants
    diluted look-alike negatives. A mention contributes
    ``mention_tokens`` of the symptom's tokens, so low values keep
    per-token evidence scarce. Every sentence carries a hedge level h
    in {0..3}; h hedge tokens are inserted, and when the sentence is
    relevant to its own queue each annotator votes Uncertain
    independently with probability h/3.
    """
    rng = np.random.default_rng(seed)
    kg = world.kg
    disease_ids = world.disease_ids
    symptom_ids = world.symptom_ids
    col = {sid: j for j, sid in enumerate(symptom_ids)}
    n_sym = len(symptom_ids)

    typical = {d: tuple(sorted(typical_symptoms(kg, d))) for d in disease_ids}
    outside = {
        d: tuple(sorted(set(symptom_ids) - set(typical[d]))) for d in disease_ids
    }

    texts = []
    queue = []
    truth = np.zeros((n_sentences, n_sym), dtype=bool)
    observed = np.zeros((n_sentences, n_sym), dtype=bool)
    hedge_levels = np.full(n_sentences, -1, dtype=np.int64)
    votes = np.zeros((n_sentences, n_annotators), dtype=np.int8)
    status_q = np.full(n_sentences, np.nan)

    for i in range(n_sentences):
        d = disease_ids[int(rng.integers(len(disease_ids)))]
        queue.append(d)
        for sid in typical[d]:
            observed[i, col[sid]] = True

        u = float(rng.random())
        n_topics = 1 if u < 0.45 else (2 if u < 0.75 else 0)
        mentioned = [
            typical[d][int(k)]
            for k in rng.choice(len(typical[d]), size=n_topics, replace=False)
        ]
        terse = bool(rng.random() < 0.5)
        length = int(rng.integers(4, 7)) if terse else int(rng.integers(9, 14))
        if terse:
            n_leak = int(rng.binomial(5, leak_prob))
            if outside[d] and n_leak:
                picks = rng.choice(
                    len(outside[d]), size=min(n_leak, len(outside[d])), replace=False
                )
                mentioned.extend(outside[d][int(k)] for k in picks)

        tokens: list[str] = []
        for sid in mentioned:
            truth[i, col[sid]] = True
            pool = world.symptom_tokens(sid)
            picks = rng.choice(len(pool), size=min(mention_tokens, len(pool)), replace=False)
            tokens.extend(pool[int(k)] for k in picks)
            if not terse:
                for off in (-1, 1):
                    if float(rng.random()) < confuse_prob:
                        neighbor = symptom_ids[(col[sid] + off) % n_sym]
                        neighbor_pool = world.symptom_tokens(neighbor)
                        tokens.append(neighbor_pool[int(rng.integers(len(neighbor_pool)))])
        n_fill = max(2, length - len(tokens))
        fills = rng.choice(len(world.fillers), size=n_fill, replace=True)
        tokens.extend(world.fillers[int(k)] for k in fills)

        h = int(rng.integers(0, 4))
        hedge_levels[i] = h
        picks = rng.choice(len(HEDGES), size=h, replace=True)
        tokens.extend(HEDGES[int(k)] for k in picks)
        if any(truth[i, col[s]] for s in typical[d]):
            votes[i] = (rng.random(n_annotators) < h / 3).astype(np.int8)
            status_q[i] = float(votes[i].mean())
        rng.shuffle(tokens)
        texts.append(" ".join(tokens))

    annotated = rng.random(n_sentences) < annotated_fraction
    return RelevanceCorpus(
        symptom_ids=tuple(symptom_ids),
        sentence_ids=tuple(f"x{i:05d}" for i in range(n_sentences)),
        texts=tuple(texts),
        queue_disease=tuple(queue),
        truth=truth,
        observed=observed,
        annotated=annotated,
        hedge_levels=hedge_levels,
        votes=votes,
        status_q=status_q,
    )


def observed_label_mask(corpus: RelevanceCorpus) -> LabelMask:
    """Training labels as the annotation pass would deliver them.

    Rows are the annotated sentences only; symptom entries outside the
    queue's typical set are missing, inside it they follow the truth.
    """
    rows = np.where(corpus.annotated)[0]
    states = np.where(
        corpus.observed[rows],
        corpus.truth[rows].astype(np.int8),
        np.int8(MASK_MISSING),
    ).astype(np.int8)
    return LabelMask(
        sentence_ids=tuple(corpus.sentence_ids[i] for i in rows),
        symptom_ids=corpus.symptom_ids,
        states=states,
    )


def truth_label_mask(corpus: RelevanceCorpus, rows: np.ndarray) -> LabelMask:
    """Fully observed labels for the given rows, for privileged evaluation."""
    return LabelMask(
        sentence_ids=tuple(corpus.sentence_ids[int(i)] for i in rows),
        symptom_ids=corpus.symptom_ids,
        states=corpus.truth[rows].astype(np.int8),
    )


def annotation_records(
    corpus: RelevanceCorpus,
    id_map: dict[str, str] | None = None,
) -> list[AnnotationRecord]:
    """Per-annotator records for the annotated sentences.

    All annotators mark relevance identically (the observed truth);
    annotator j votes Uncertain according to the corpus vote matrix.
    ``id_map`` optionally rewrites sentence ids, for corpora that were
    repackaged into posts.
    """
    records = []
    n_annotators = corpus.votes.shape[1]
    for i in np.where(corpus.annotated)[0]:
        sentence_id = corpus.sentence_ids[i]
        if id_map is not None:
            sentence_id = id_map[sentence_id]
        relevance = {
            corpus.symptom_ids[j]: bool(corpus.truth[i, j])
            for j in np.where(corpus.observed[i])[0]
        }
        any_relevant = any(relevance.values())
        for a in range(n_annotators):
            status = None
            if any_relevant:
                status = Status.UNCERTAIN if corpus.votes[i, a] else Status.TRUE
            records.append(
                AnnotationRecord(
                    sentence_id=sentence_id,
                    annotator_id=f"a{a + 1}",
                    relevance=dict(relevance),
                    status=status,
                )
            )
    return records


@dataclass(frozen=True)
class RetrievalCorpus:
    """Planted symptom mentions among filler-only distractors.

    ``paraphrase_only`` marks planted sentences built without a single
    keyword token, which keyword lexicons cannot retrieve.
    """

    sentence_ids: tuple[str, ...]
    texts: tuple[str, ...]
    planted_symptom: tuple[str | None, ...]
    paraphrase_only: np.ndarray
    gold: dict[tuple[str, str], bool]


def generate_retrieval_corpus(
    world: World,
    n_planted: int = 500,
    n_distractors: int = 5000,
    seed: int = 0,
) -> RetrievalCorpus:
    """Sentences for comparing lexicon and embedding retrieval routes.

    Planted sentence j mentions symptom j mod S. Three out of every five
    planted sentences use paraphrase tokens only; the rest contain one
    or two keyword tokens. Distractors are filler-only.
    """
    rng = np.random.default_rng(seed)
    symptom_ids = world.symptom_ids
    ids = []
    texts = []
    planted: list[str | None] = []
    para_only = np.zeros(n_planted + n_distractors, dtype=bool)

    for j in range(n_planted):
        sid = symptom_ids[j % len(symptom_ids)]
        tokens: list[str] = []
        if j % 5 < 3:
            para_only[j] = True
            pool = world.paraphrases[sid]
            picks = rng.choice(len(pool), size=3, replace=False)
            tokens.extend(pool[int(k)] for k in picks)
        else:
            kw = world.keywords[sid]
            picks = rng.choice(len(kw), size=int(rng.integers(1, 3)), replace=False)
            tokens.extend(kw[int(k)] for k in picks)
            if rng.random() < 0.5:
                tokens.append(world.paraphrases[sid][int(rng.integers(3))])
        n_fill = max(3, int(rng.integers(8, 12)) - len(tokens))
        fills = rng.choice(len(world.fillers), size=n_fill, replace=True)
        tokens.extend(world.fillers[int(k)] for k in fills)
        rng.shuffle(tokens)
        ids.append(f"r{j:05d}")
        texts.append(" ".join(tokens))
        planted.append(sid)

    for j in range(n_distractors):
        fills = rng.choice(len(world.fillers), size=int(rng.integers(8, 12)), replace=True)
        ids.append(f"r{n_planted + j:05d}")
        texts.append(" ".join(world.fillers[int(k)] for k in fills))
        planted.append(None)

    gold = {
        (sentence_id, sid): planted_sid == sid
        for sentence_id, planted_sid in zip(ids, planted)
        for sid in symptom_ids
    }
    return RetrievalCorpus(
        sentence_ids=tuple(ids),
        texts=tuple(texts),
        planted_symptom=tuple(planted),
        paraphrase_only=para_only,
        gold=gold,
    )


@dataclass(frozen=True)
class UserCorpus:
    """User histories with disease labels, for detection benchmarks."""

    users: tuple[UserHistory, ...]


def _symptom_phrase(world: World, symptom_id: str, rng: np.random.Generator) -> str:
    pool = world.symptom_tokens(symptom_id)
    picks = rng.choice(len(pool), size=2, replace=False)
    return f"{pool[int(picks[0])]} {pool[int(picks[1])]}"


def _filler_phrase(world: World, rng: np.random.Generator, n: int = 4) -> str:
    fills = rng.choice(len(world.fillers), size=n, replace=True)
    return " ".join(world.fillers[int(k)] for k in fills)


def generate_user_corpus(
    world: World,
    positives_per_disease: int = 20,
    n_controls: int = 40,
    posts_per_user: int = 8,
    seed: int = 0,
) -> UserCorpus:
    """Positive users write first-person, unhedged posts about their
    disease's typical symptoms. Controls mix filler posts with two
    confounders: third-person symptom mentions and hedged first-person
    mentions. Subject and certainty reweighting should suppress both."""
    rng = np.random.default_rng(seed)
    kg = world.kg
    users = []
    uid = 0
    for d in world.disease_ids:
        typ = tuple(sorted(typical_symptoms(kg, d)))
        for _ in range(positives_per_disease):
            posts = []
            for _ in range(posts_per_user):
                if rng.random() < 0.55:
                    sid = typ[int(rng.integers(len(typ)))]
                    posts.append(
                        f"i feel {_symptom_phrase(world, sid, rng)} every day"
                    )
                else:
                    posts.append(f"the {_filler_phrase(world, rng)} was fine")
            label = {d2: d2 == d for d2 in world.disease_ids}
            users.append(UserHistory(f"u{uid:04d}", tuple(posts), label))
            uid += 1
    all_symptoms = world.symptom_ids
    for _ in range(n_controls):
        posts = []
        for _ in range(posts_per_user):
            u = rng.random()
            sid = all_symptoms[int(rng.integers(len(all_symptoms)))]
            if u < 0.30:
                posts.append(
                    f"she says he feels {_symptom_phrase(world, sid, rng)} every day"
                )
            elif u < 0.45:
                posts.append(
                    f"maybe i feel {_symptom_phrase(world, sid, rng)} unsure i guess"
                )
            else:
                posts.append(f"the {_filler_phrase(world, rng)} was fine")
        label = {d2: False for d2 in world.disease_ids}
        users.append(UserHistory(f"u{uid:04d}", tuple(posts), label))
        uid += 1
    return UserCorpus(users=tuple(users))


_CONFIG_TEMPLATE = """\
[paths]
kg = "kg.json"
posts = "posts.ndjson"
lexicons = "lexicons"
annotations = "annotations.tsv"
users = "users.ndjson"
diagnosis_rule = "diagnosis_rule.json"
out = "out"

[retrieval]
embedding_dim = 256
embedding_seed = 7
capacity = 300
bands = 32
rows = 4
num_hashes = 128
shingle_size = 3
dedup_threshold = 0.8
dedup_seed = 11

[splits]
ratios = [5, 1, 4]
seed = 13

[relevance]
mode = "label_enhance"
target_tnr = 0.9
learning_rate = 0.5
epochs = 30
batch_size = 64
patience = 4
seed = 17
min_df = 1

[status]
learning_rate = 0.5
epochs = 30
batch_size = 64
patience = 4
seed = 19

[mdd]
variant = "conv"
kernel_sizes = [3, 5, 7]
channels = 8
learning_rate = 0.05
epochs = 20
batch_size = 16
patience = 4
seed = 23

[controls]
exclude_subreddits = [{exclude_subreddits}]
exclude_terms = ["diagnosed"]
n_users = {n_controls}
seed = 29

[audit]
fp_coverage_max = 0.2
fn_coverage_min = 0.6
"""


@dataclass
class FixtureSummary:
    """What a fixture tree contains, keyed by relative path."""

    root: Path
    files: dict[str, str] = field(default_factory=dict)


def write_fixtures(out_dir: str | Path, seed: int = 0) -> FixtureSummary:
    """Materialize a complete input tree for the command-line pipeline.

    The tree holds a graph, per-symptom keyword lexicons, a post corpus
    whose sentences reproduce a relevance corpus exactly (with markdown
    links and removed-content markers sprinkled in), an annotation TSV
    over a third of those sentences, labeled user histories, a
    self-reported-diagnosis rule, and a config file wired to relative
    paths. Runs with equal seeds produce byte-identical trees.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "lexicons").mkdir(exist_ok=True)
    world = make_world(WorldSpec(seed=seed))
    corpus = generate_relevance_corpus(world, n_sentences=360, seed=seed + 1)

    save_kg(world.kg, root / "kg.json")
    for sid in world.symptom_ids:
        (root / "lexicons" / f"{sid}.txt").write_text(
            "\n".join(world.keywords[sid]) + "\n", encoding="utf-8"
        )

    # Pack sentences into three-sentence posts, grouped by queue disease so
    # each author's history stays on topic. Every fifth post hides one token
    # of its first sentence behind a markdown link and every seventh gets a
    # trailing removed-content line; the cleaning steps undo both, keeping
    # sentence ids aligned with the annotation TSV.
    rng = np.random.default_rng(seed + 2)
    by_disease: dict[str, list[int]] = {d: [] for d in world.disease_ids}
    for i, d in enumerate(corpus.queue_disease):
        by_disease[d].append(i)

    posts: list[RawPost] = []
    id_map: dict[str, str] = {}
    diagnosed_authors: dict[str, list[str]] = {}
    post_num = 0
    created = 5000
    for d in world.disease_ids:
        authors = [f"u_{d}_{a}" for a in range(4)]
        diagnosed_authors[d] = authors
        rows = by_disease[d]
        for chunk_start in range(0, len(rows), 3):
            chunk = rows[chunk_start : chunk_start + 3]
            post_id = f"p{post_num:04d}"
            sentence_texts = []
            for k, i in enumerate(chunk):
                id_map[corpus.sentence_ids[i]] = f"{post_id}:{k}"
                sentence_texts.append(corpus.texts[i] + ".")
            if post_num % 5 == 0:
                first = sentence_texts[0].split(" ")
                j = int(rng.integers(len(first)))
                first[j] = f"[{first[j]}](https://example.com/{post_num})"
                sentence_texts[0] = " ".join(first)
            body = "\n".join(sentence_texts)
            if post_num % 7 == 0:
                body += "\n[removed]"
            posts.append(
                RawPost(
                    id=post_id,
                    author=authors[(chunk_start // 3) % len(authors)],
                    subreddit=f"{d}_community",
                    created=created,
                    text=body,
                )
            )
            post_num += 1
            created += 10
    for d in world.disease_ids:
        name = world.kg.disease(d).name.lower()
        for author in diagnosed_authors[d]:
            posts.append(
                RawPost(
                    id=f"p{post_num:04d}",
                    author=author,
                    subreddit=f"{d}_community",
                    created=created,
                    text=f"i was diagnosed with {name} last spring.",
                )
            )
            post_num += 1
            created += 10
    n_controls = 8
    for c in range(n_controls):
        author = f"u_ctl_{c}"
        for _ in range(3):
            posts.append(
                RawPost(
                    id=f"p{post_num:04d}",
                    author=author,
                    subreddit="neutral_talk",
                    created=created,
                    text=f"the {_filler_phrase(world, rng, 6)} was fine.",
                )
            )
            post_num += 1
            created += 10
    save_posts(posts, root / "posts.ndjson")

    records = annotation_records(corpus, id_map=id_map)
    save_annotations(records, root / "annotations.tsv")

    user_corpus = generate_user_corpus(
        world, positives_per_disease=5, n_controls=8, posts_per_user=6, seed=seed + 3
    )
    save_users(user_corpus.users, root / "users.ndjson")

    rule = {
        "patterns": ["diagnosed with"],
        "keywords": {
            d: [world.kg.disease(d).name.lower()] for d in world.disease_ids
        },
        "window": 40,
    }
    (root / "diagnosis_rule.json").write_text(
        json.dumps(rule, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    exclude = ", ".join(f'"{d}_community"' for d in world.disease_ids)
    (root / "config.toml").write_text(
        _CONFIG_TEMPLATE.format(exclude_subreddits=exclude, n_controls=n_controls),
        encoding="utf-8",
    )

    summary = FixtureSummary(root=root)
    for path in sorted(root.rglob("*")):
        if path.is_file() and not path.name.startswith("manifest"):
            summary.files[str(path.relative_to(root))] = path.name
    return summary
