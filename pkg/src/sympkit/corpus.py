"""Post ingestion, cleaning, sentence splitting, user labeling, splits.

Posts arrive as newline-delimited JSON records. Cleaning flattens
markdown links to their anchor text; sentence splitting is a fixed rule
set (terminal punctuation followed by whitespace, newlines split, a
guard list protects abbreviations) so that behavior is owned by this
package and bit-reproducible.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SchemaError

SPLIT_NAMES = ("train", "validation", "test")
DEFAULT_RATIOS = (5, 1, 4)
DEFAULT_WINDOW = 40

# Sentences equal to these sentinels (after trimming, case-insensitive)
# mark removed or deleted content and are dropped.
REMOVED_SENTINELS = frozenset({"[removed]", "[deleted]"})

# Tokens whose trailing period never ends a sentence. Single letters
# followed by a period (initials like "J.") are guarded by rule.
ABBREVIATIONS = frozenset(
    {
        "e.g.", "i.e.", "etc.", "cf.", "vs.", "al.", "st.", "no.", "nr.",
        "mr.", "mrs.", "ms.", "dr.", "prof.", "rev.", "jr.", "sr.",
        "a.m.", "p.m.", "u.s.", "u.k.", "inc.", "ltd.", "co.", "dept.",
        "fig.", "approx.", "min.", "max.", "misc.", "vol.",
    }
)

# One level of nested square brackets is supported inside the anchor.
_MARKDOWN_LINK_RE = re.compile(r"\[((?:[^\[\]]|\[[^\[\]]*\])*)\]\(([^()\s]*)\)")

_TERMINAL_RE = re.compile(r"[.!?]+(?=\s|$)")


@dataclass(frozen=True)
class RawPost:
    id: str
    author: str
    subreddit: str
    created: int
    text: str

    def __post_init__(self) -> None:
        if self.created < 0:
            raise SchemaError(f"post {self.id!r} has negative created time")


@dataclass(frozen=True)
class Sentence:
    post_id: str
    index: int
    text: str

    @property
    def id(self) -> str:
        return make_sentence_id(self.post_id, self.index)


def make_sentence_id(post_id: str, index: int) -> str:
    return f"{post_id}:{index}"


@dataclass(frozen=True)
class DiagnosisRule:
    """Self-reported-diagnosis matcher: trigger patterns plus disease keywords."""

    diagnosis_patterns: tuple[str, ...]
    disease_keywords: dict[str, tuple[str, ...]]
    window: int = DEFAULT_WINDOW

    def __post_init__(self) -> None:
        if self.window <= 0:
            raise SchemaError("diagnosis window must be positive")
        if not self.diagnosis_patterns:
            raise SchemaError("diagnosis rule needs at least one pattern")


def clean_text(text: str) -> str:
    """Flatten markdown links ``[anchor](url)`` to their anchor text."""
    return _MARKDOWN_LINK_RE.sub(lambda m: m.group(1), text)


def clean_post(post: RawPost) -> RawPost:
    return replace(post, text=clean_text(post.text))


def split_text(text: str, abbreviations: frozenset[str] = ABBREVIATIONS) -> list[str]:
    """Split text into trimmed sentences, dropping empties and sentinels."""
    sentences: list[str] = []
    for line in text.split("\n"):
        start = 0
        for match in _TERMINAL_RE.finditer(line):
            end = match.end()
            if match.group().startswith("."):
                token = line[:end].rsplit(None, 1)[-1].lower()
                if token in abbreviations or re.fullmatch(r"\W*[a-z]\.", token):
                    continue
            fragment = line[start:end].strip()
            if fragment:
                sentences.append(fragment)
            start = end
        tail = line[start:].strip()
        if tail:
            sentences.append(tail)
    return [s for s in sentences if s.lower() not in REMOVED_SENTINELS]


def split_sentences(post: RawPost, abbreviations: frozenset[str] = ABBREVIATIONS) -> list[Sentence]:
    """Sentences of a (cleaned) post, indexed by position."""
    return [
        Sentence(post_id=post.id, index=i, text=fragment)
        for i, fragment in enumerate(split_text(post.text, abbreviations))
    ]


def _occurrences(haystack: str, needle: str) -> list[tuple[int, int]]:
    spans = []
    start = 0
    while True:
        pos = haystack.find(needle, start)
        if pos < 0:
            return spans
        spans.append((pos, pos + len(needle)))
        start = pos + 1


def label_diagnosed_users(
    posts: Sequence[RawPost], rule: DiagnosisRule
) -> tuple[dict[str, set[str]], set[str]]:
    """Map authors to self-reported diseases; also return diagnostic post ids.

    A disease keyword counts when the gap between the nearest edges of
    the keyword match and a diagnosis-pattern match is at most
    ``rule.window`` characters, on either side. Matching is
    case-insensitive.
    """
    labels: dict[str, set[str]] = {}
    diagnostic_ids: set[str] = set()
    patterns = [p.lower() for p in rule.diagnosis_patterns]
    keywords = {d: [k.lower() for k in kws] for d, kws in rule.disease_keywords.items()}
    for post in posts:
        text = post.text.lower()
        pattern_spans = [span for p in patterns for span in _occurrences(text, p)]
        if not pattern_spans:
            continue
        hit = False
        for disease_id, kws in keywords.items():
            keyword_spans = [span for k in kws for span in _occurrences(text, k)]
            for ks, ke in keyword_spans:
                if any(max(ks - pe, ps - ke) <= rule.window for ps, pe in pattern_spans):
                    labels.setdefault(post.author, set()).add(disease_id)
                    hit = True
                    break
        if hit:
            diagnostic_ids.add(post.id)
    return labels, diagnostic_ids


def filter_diagnostic_posts(posts: Sequence[RawPost], diagnostic_ids: set[str]) -> list[RawPost]:
    """Remove exactly the flagged posts, preserving order."""
    return [post for post in posts if post.id not in diagnostic_ids]


def sample_control_users(
    posts: Sequence[RawPost],
    mh_subreddits: set[str],
    mh_terms: Iterable[str],
    n: int,
    seed: int,
) -> set[str]:
    """Seeded uniform sample of users with no mental-health activity.

    Eligible users have no post in any listed subreddit and no post
    containing any listed term (case-insensitive substring).
    """
    subreddits = {s.lower() for s in mh_subreddits}
    terms = [t.lower() for t in mh_terms if t]
    tainted: set[str] = set()
    authors: set[str] = set()
    for post in posts:
        authors.add(post.author)
        if post.subreddit.lower() in subreddits:
            tainted.add(post.author)
            continue
        lowered = post.text.lower()
        if any(term in lowered for term in terms):
            tainted.add(post.author)
    eligible = sorted(authors - tainted)
    if n > len(eligible):
        raise ValueError(f"requested {n} control users but only {len(eligible)} are eligible")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(eligible), size=n, replace=False)
    return {eligible[i] for i in picked}


def _largest_remainder_counts(total: int, ratios: Sequence[int]) -> list[int]:
    weight = sum(ratios)
    exact = [total * r / weight for r in ratios]
    counts = [int(x) for x in exact]
    shortfall = total - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (counts[i] - exact[i], i))
    for i in order[:shortfall]:
        counts[i] += 1
    return counts


def split_dataset(
    ids: Sequence[str],
    ratios: Sequence[int] = DEFAULT_RATIOS,
    seed: int = 0,
    strata: Mapping[str, str] | None = None,
) -> dict[str, str]:
    """Seeded train/validation/test partition in the given proportions.

    With ``strata`` the proportions hold within each stratum to +-1
    item. Every id lands in exactly one split.
    """
    if not ids:
        raise ValueError("cannot split an empty id list")
    if len(ratios) != len(SPLIT_NAMES) or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be {len(SPLIT_NAMES)} positive numbers, got {ratios!r}")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    rng = np.random.default_rng(seed)
    groups: dict[str, list[str]] = {}
    if strata is None:
        groups[""] = list(ids)
    else:
        for item in ids:
            groups.setdefault(strata[item], []).append(item)
    assignment: dict[str, str] = {}
    for stratum in sorted(groups):
        members = groups[stratum]
        order = rng.permutation(len(members))
        shuffled = [members[i] for i in order]
        counts = _largest_remainder_counts(len(members), ratios)
        cursor = 0
        for name, count in zip(SPLIT_NAMES, counts):
            for item in shuffled[cursor : cursor + count]:
                assignment[item] = name
            cursor += count
    return assignment


# ---------------------------------------------------------------------------
# File formats


def load_posts(path: str | Path) -> list[RawPost]:
    """Read NDJSON posts (id, author, subreddit, created_utc, selftext)."""
    posts: list[RawPost] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                posts.append(
                    RawPost(
                        id=str(rec["id"]),
                        author=str(rec["author"]),
                        subreddit=str(rec.get("subreddit", "")),
                        created=int(rec.get("created_utc", 0)),
                        text=str(rec.get("selftext", "")),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad post record: {exc!r}") from exc
    seen: set[str] = set()
    for post in posts:
        if post.id in seen:
            raise SchemaError(f"duplicate post id {post.id!r}")
        seen.add(post.id)
    return posts


def save_posts(posts: Iterable[RawPost], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for post in posts:
            handle.write(
                json.dumps(
                    {
                        "id": post.id,
                        "author": post.author,
                        "subreddit": post.subreddit,
                        "created_utc": post.created,
                        "selftext": post.text,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_diagnosis_rule(path: str | Path) -> DiagnosisRule:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return DiagnosisRule(
            diagnosis_patterns=tuple(raw["patterns"]),
            disease_keywords={d: tuple(kws) for d, kws in raw["keywords"].items()},
            window=int(raw.get("window", DEFAULT_WINDOW)),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SchemaError(f"cannot parse diagnosis rule {path}: {exc!r}") from exc


def save_splits(assignment: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for item_id in sorted(assignment):
            handle.write(f"{item_id}\t{assignment[item_id]}\n")


def load_splits(path: str | Path) -> dict[str, str]:
    assignment: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                item_id, split = line.split("\t")
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: expected two TSV columns") from exc
            if split not in SPLIT_NAMES:
                raise SchemaError(f"{path}:{lineno}: unknown split {split!r}")
            assignment[item_id] = split
    return assignment
