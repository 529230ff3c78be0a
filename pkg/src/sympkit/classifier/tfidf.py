"""TF-IDF features from scratch, backed by scipy sparse rows."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from ..errors import SchemaError

DEFAULT_TOKEN_PATTERN = r"[A-Za-z0-9']+"


@dataclass(frozen=True)
class TfidfConfig:
    min_df: int = 1
    max_vocab: int | None = None
    lowercase: bool = True
    token_pattern: str = DEFAULT_TOKEN_PATTERN

    def __post_init__(self) -> None:
        if self.min_df < 1:
            raise SchemaError("min_df must be >= 1")
        if self.max_vocab is not None and self.max_vocab < 1:
            raise SchemaError("max_vocab must be >= 1 when set")


@dataclass(frozen=True)
class TfidfVectorizer:
    """Fitted vocabulary with smoothed idf weights.

    tf is term count over document token length; idf is
    ln((1 + N) / (1 + df)) + 1; rows are L2-normalized.
    """

    vocabulary: dict[str, int]
    idf: np.ndarray
    config: TfidfConfig = field(default_factory=TfidfConfig)

    def __post_init__(self) -> None:
        if len(self.vocabulary) != self.idf.shape[0]:
            raise SchemaError("idf length does not match vocabulary size")
        if sorted(self.vocabulary.values()) != list(range(len(self.vocabulary))):
            raise SchemaError("vocabulary indices must be dense 0..V-1")
        if len(self.idf) and not np.all(self.idf > 0):
            raise SchemaError("idf weights must be positive")

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def tokenize(self, text: str) -> list[str]:
        tokens = re.findall(self.config.token_pattern, text)
        if self.config.lowercase:
            tokens = [token.lower() for token in tokens]
        return tokens

    def transform(self, texts: Sequence[str]) -> sparse.csr_matrix:
        """Row-normalized tf-idf matrix; out-of-vocabulary terms are ignored."""
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for text in texts:
            tokens = self.tokenize(text)
            counts = Counter(tokens)
            length = len(tokens)
            row = []
            for term, count in counts.items():
                col = self.vocabulary.get(term)
                if col is not None:
                    row.append((col, count / length * self.idf[col]))
            row.sort()
            norm = np.sqrt(sum(value * value for _, value in row))
            for col, value in row:
                indices.append(col)
                data.append(value / norm if norm else value)
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
            shape=(len(texts), self.dim),
        )


def fit_tfidf(texts: Sequence[str], config: TfidfConfig | None = None) -> TfidfVectorizer:
    """Build vocabulary and idf weights from a training corpus."""
    config = config or TfidfConfig()
    doc_freq: Counter[str] = Counter()
    n_docs = 0
    helper = TfidfVectorizer(vocabulary={}, idf=np.empty(0), config=config)
    for text in texts:
        tokens = helper.tokenize(text)
        if not tokens:
            continue
        n_docs += 1
        doc_freq.update(set(tokens))
    if n_docs == 0:
        raise SchemaError("cannot fit tf-idf on an empty corpus")
    terms = [term for term, df in doc_freq.items() if df >= config.min_df]
    if config.max_vocab is not None and len(terms) > config.max_vocab:
        terms.sort(key=lambda term: (-doc_freq[term], term))
        terms = terms[: config.max_vocab]
    terms.sort()
    vocabulary = {term: index for index, term in enumerate(terms)}
    idf = np.array(
        [np.log((1 + n_docs) / (1 + doc_freq[term])) + 1.0 for term in terms]
    )
    return TfidfVectorizer(vocabulary=vocabulary, idf=idf, config=config)
