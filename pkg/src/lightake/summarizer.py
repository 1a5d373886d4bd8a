"""Centrality-as-relevance light filtering.

Each passage gets a support set of its nearest passages; passages that occur
in the most support sets are the most central. Light filtering drops the
least central sentences at a given compression ratio (CR).
"""

import logging
import math
from enum import Enum
from fractions import Fraction
from typing import Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .exceptions import ConfigurationError
from .textcore import Document, TermVector, build_idf, vectorize

logger = logging.getLogger(__name__)

# Stories whose filtered version would have this many sentences or fewer are left as is.
GUARD_MIN_SENTENCES = 3

# Distances are compared at this precision so that equal distances tie exactly.
DISTANCE_DECIMALS = 12


class MetricKind(str, Enum):
    MANHATTAN = "manhattan"
    EUCLIDEAN = "euclidean"
    CHEBYSHEV = "chebyshev"
    MINKOWSKI = "minkowski"
    COSINE = "cosine"


class DistanceMetric(BaseModel):
    """Geometric proximity measure between passage vectors.

    `p` is only used by minkowski. Cosine distance is 1 - cosine similarity,
    and 1 whenever either vector is empty.
    """

    model_config = ConfigDict(frozen=True)

    kind: MetricKind = MetricKind.MANHATTAN
    p: float = 3.0

    @model_validator(mode="after")
    def _check_p(self) -> "DistanceMetric":
        if not math.isfinite(self.p) or self.p <= 0:
            raise ValueError(f"minkowski order must be finite and > 0, got {self.p}")
        return self

    @property
    def label(self) -> str:
        return self.kind.value


class SscSpec(BaseModel):
    """Support set cardinality, absolute or as a percentage of the passages."""

    model_config = ConfigDict(frozen=True)

    mode: Literal["absolute", "percent"]
    value: float

    @model_validator(mode="after")
    def _check_value(self) -> "SscSpec":
        if self.mode == "percent":
            if not 0 < self.value <= 100:
                raise ValueError(f"percent SSC must be in (0, 100], got {self.value}")
        elif self.value < 1 or self.value != int(self.value):
            raise ValueError(f"absolute SSC must be an integer >= 1, got {self.value}")
        return self

    @classmethod
    def parse(cls, text: Union[str, int, float]) -> "SscSpec":
        """Parse "10%" (percent) or "8" (absolute)."""
        raw = str(text).strip()
        try:
            if raw.endswith("%"):
                return cls(mode="percent", value=float(raw[:-1]))
            return cls(mode="absolute", value=float(raw))
        except ValueError as e:
            raise ConfigurationError(f"Invalid support set cardinality {raw!r}: {e}") from e

    @property
    def label(self) -> str:
        if self.mode == "percent":
            return f"{self.value:g}%"
        return str(int(self.value))


class CentralityConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    metric: DistanceMetric
    ssc: SscSpec

    @property
    def label(self) -> str:
        return f"{self.ssc.label}/{self.metric.label}"


class CentralityRanking(BaseModel):
    """Support-set membership counts and the induced sentence order."""

    model_config = ConfigDict(frozen=True)

    scores: tuple[int, ...]
    order: tuple[int, ...]

    @model_validator(mode="after")
    def _check_order(self) -> "CentralityRanking":
        expected = sorted(range(len(self.scores)), key=lambda j: (-self.scores[j], j))
        if list(self.order) != expected:
            raise ValueError("order must sort sentences by (score desc, index asc)")
        return self

    @classmethod
    def from_scores(cls, scores: Sequence[int]) -> "CentralityRanking":
        order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
        return cls(scores=tuple(scores), order=tuple(order))


class FilterResult(BaseModel):
    """A filtered document and the original indices of its sentences."""

    model_config = ConfigDict(frozen=True)

    document: Document
    kept_indices: tuple[int, ...]
    cr: float
    guard_triggered: bool = False


def _snap(value: float) -> float:
    return round(value, DISTANCE_DECIMALS) + 0.0


def distance(u: TermVector, v: TermVector, metric: DistanceMetric) -> float:
    """Distance between two sparse vectors; missing stems count as 0.

    The result is rounded to DISTANCE_DECIMALS places.
    """
    keys = sorted(u.weights.keys() | v.weights.keys())
    a = np.fromiter((u.weights.get(key, 0.0) for key in keys), dtype=np.float64, count=len(keys))
    b = np.fromiter((v.weights.get(key, 0.0) for key in keys), dtype=np.float64, count=len(keys))

    if metric.kind is MetricKind.COSINE:
        if u.norm_l2 == 0.0 or v.norm_l2 == 0.0:
            return 1.0
        similarity = float(np.dot(a, b)) / (u.norm_l2 * v.norm_l2)
        return _snap(max(0.0, 1.0 - similarity))

    diff = np.abs(a - b)
    if diff.size == 0:
        return 0.0
    if metric.kind is MetricKind.MANHATTAN:
        return _snap(float(diff.sum()))
    if metric.kind is MetricKind.EUCLIDEAN:
        return _snap(float(np.sqrt(np.dot(diff, diff))))
    if metric.kind is MetricKind.CHEBYSHEV:
        return _snap(float(diff.max()))

    # Minkowski, scaled by the largest difference so high orders do not overflow.
    largest = float(diff.max())
    if largest == 0.0:
        return 0.0
    return _snap(largest * float(np.sum((diff / largest) ** metric.p) ** (1.0 / metric.p)))


def pairwise_distances(vectors: Sequence[TermVector], metric: DistanceMetric) -> np.ndarray:
    """Symmetric distance matrix; each unordered pair is computed once."""
    n = len(vectors)
    matrix = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            matrix[i, j] = matrix[j, i] = distance(vectors[i], vectors[j], metric)
    return matrix


def support_set_cardinality(spec: SscSpec, n_passages: int) -> int:
    """Number of neighbours in each support set for a document of `n_passages`.

    Percentages are taken of the passage count and rounded half up; the
    result is clamped to [1, n_passages - 1]. A single passage has no
    neighbours.
    """
    if n_passages <= 1:
        return 0
    if spec.mode == "absolute":
        return min(int(spec.value), n_passages - 1)
    exact = Fraction(repr(spec.value)) / 100 * n_passages
    return max(1, min(math.floor(exact + Fraction(1, 2)), n_passages - 1))


def build_support_sets(
    vectors: Sequence[TermVector], config: CentralityConfig
) -> list[frozenset[int]]:
    """Support set of each passage: its k nearest other passages.

    Ties at equal distance admit the smaller sentence index.
    """
    n = len(vectors)
    k = support_set_cardinality(config.ssc, n)
    matrix = pairwise_distances(vectors, config.metric)
    support_sets = []
    for i in range(n):
        neighbours = sorted((float(matrix[i, j]), j) for j in range(n) if j != i)
        support_sets.append(frozenset(j for _, j in neighbours[:k]))
    return support_sets


def centrality_rank(vectors: Sequence[TermVector], config: CentralityConfig) -> CentralityRanking:
    """Score each passage by the number of support sets that contain it."""
    scores = [0] * len(vectors)
    for support_set in build_support_sets(vectors, config):
        for j in support_set:
            scores[j] += 1
    return CentralityRanking.from_scores(scores)


def passage_vectors(
    document: Document, stopwords: frozenset[str] = frozenset()
) -> list[TermVector]:
    """TF×IDF vectors of each sentence, IDF computed over the document's sentences."""
    idf = build_idf([document], unit="sentence")
    return [vectorize(sentence, idf, stopwords) for sentence in document.sentences]


def rank_document(
    document: Document, config: CentralityConfig, stopwords: frozenset[str] = frozenset()
) -> CentralityRanking:
    return centrality_rank(passage_vectors(document, stopwords), config)


def keep_count(n_sentences: int, cr: float) -> int:
    """ceiling((1 - cr) × N), evaluated on the decimal value of `cr`."""
    return math.ceil((1 - Fraction(repr(cr))) * n_sentences)


def _select(document: Document, indices: Sequence[int], cr: float) -> FilterResult:
    kept = tuple(sorted(indices))
    sentences = tuple(
        document.sentences[original].model_copy(update={"index": position})
        for position, original in enumerate(kept)
    )
    filtered = Document(id=document.id, sentences=sentences, source_path=document.source_path)
    return FilterResult(document=filtered, kept_indices=kept, cr=cr)


def _unchanged(document: Document, cr: float, guard_triggered: bool = False) -> FilterResult:
    return FilterResult(
        document=document,
        kept_indices=tuple(range(len(document.sentences))),
        cr=cr,
        guard_triggered=guard_triggered,
    )


def light_filter(
    document: Document,
    cr: float,
    config: CentralityConfig,
    stopwords: frozenset[str] = frozenset(),
    ranking: Optional[CentralityRanking] = None,
) -> FilterResult:
    """Drop the least central sentences of `document` at compression ratio `cr`.

    The kept sentences stay in document order and are renumbered from 0.
    When the filtered story would have GUARD_MIN_SENTENCES sentences or
    fewer, the document is returned unchanged.

    Args:
        document: Story to filter
        cr: Fraction of sentences to remove, in [0, 1)
        config: Distance metric and support set cardinality
        stopwords: Words excluded from passage vectors
        ranking: Precomputed ranking of `document`, reused across CRs

    Returns:
        FilterResult with the filtered document and the original indices kept
    """
    if not 0.0 <= cr < 1.0:
        raise ConfigurationError(f"Compression ratio must be in [0, 1), got {cr}")

    n = len(document.sentences)
    keep = keep_count(n, cr)
    if keep >= n:
        return _unchanged(document, cr)
    if keep <= GUARD_MIN_SENTENCES:
        logger.debug(f"{document.id}: {keep} sentences would remain, leaving story unchanged")
        return _unchanged(document, cr, guard_triggered=True)

    if ranking is None:
        ranking = rank_document(document, config, stopwords)
    return _select(document, ranking.order[:keep], cr)


def length_filter(
    document: Document,
    max_sentences: int,
    config: CentralityConfig,
    stopwords: frozenset[str] = frozenset(),
    ranking: Optional[CentralityRanking] = None,
) -> FilterResult:
    """Keep only the `max_sentences` most central sentences, in document order."""
    if max_sentences < 1:
        raise ConfigurationError(f"Summary length must be >= 1, got {max_sentences}")

    n = len(document.sentences)
    if n <= max_sentences:
        return _unchanged(document, cr=0.0)
    if ranking is None:
        ranking = rank_document(document, config, stopwords)
    return _select(document, ranking.order[:max_sentences], cr=1 - max_sentences / n)
