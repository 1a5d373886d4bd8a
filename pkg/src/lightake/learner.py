"""Bagged gain-ratio decision trees for keyphrase classification."""

import logging
import math
from typing import Annotated, Callable, Iterable, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .ake import FEATURE_NAMES, FEATURE_SCHEMA, CandidatePhrase, ExtractionContext, FeatureVector
from .exceptions import ConfigurationError, SchemaMismatchError, SingleClassError
from .parallel import ordered_map
from .textcore import Document

logger = logging.getLogger(__name__)

DEFAULT_BAGS = 10
DEFAULT_MAX_DEPTH = 12
DEFAULT_MIN_LEAF = 2

# Gain ratios are compared at this precision so that mathematically equal
# splits fall through to the feature/threshold tie-break.
RATIO_DECIMALS = 12

Sampler = Callable[[int, np.random.Generator], np.ndarray]


class TrainingInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    features: FeatureVector
    label: bool
    doc_id: str
    normalized: str


class CoverageReport(BaseModel):
    """Gold phrases of a story that no candidate matched."""

    model_config = ConfigDict(frozen=True)

    doc_id: str
    n_gold: int
    unmatched: tuple[str, ...] = ()

    @property
    def n_matched(self) -> int:
        return self.n_gold - len(self.unmatched)


class LeafNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["leaf"] = "leaf"
    n_pos: int = Field(ge=0)
    n_total: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_counts(self) -> "LeafNode":
        if self.n_pos > self.n_total:
            raise ValueError(f"leaf has {self.n_pos} positives out of {self.n_total}")
        return self

    @property
    def probability(self) -> float:
        """Laplace estimate of the positive class."""
        return (self.n_pos + 1) / (self.n_total + 2)


class SplitNode(BaseModel):
    """Internal node: instances with x[feature] <= threshold go left."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["split"] = "split"
    feature: int = Field(ge=0)
    threshold: float
    left: "TreeNode"
    right: "TreeNode"

    @model_validator(mode="after")
    def _check_threshold(self) -> "SplitNode":
        if not math.isfinite(self.threshold):
            raise ValueError("split thresholds must be finite")
        return self


TreeNode = Annotated[Union[SplitNode, LeafNode], Field(discriminator="kind")]
SplitNode.model_rebuild()


class BaggedModel(BaseModel):
    """Ensemble of trees trained on bootstrap resamples."""

    model_config = ConfigDict(frozen=True)

    schema_version: str = FEATURE_SCHEMA
    feature_names: tuple[str, ...] = FEATURE_NAMES
    trees: tuple[TreeNode, ...] = Field(min_length=1)
    seed: int
    training_cr: float = Field(ge=0.0, lt=1.0)
    max_depth: int = DEFAULT_MAX_DEPTH
    min_leaf: int = DEFAULT_MIN_LEAF

    def check_schema(self) -> None:
        if self.schema_version != FEATURE_SCHEMA or tuple(self.feature_names) != FEATURE_NAMES:
            raise SchemaMismatchError(
                f"Model features {self.schema_version} {list(self.feature_names)} do not match "
                f"{FEATURE_SCHEMA} {list(FEATURE_NAMES)}"
            )


class Keyphrase(BaseModel):
    """An extracted keyphrase with its ranking keys."""

    model_config = ConfigDict(frozen=True)

    phrase: str
    normalized: str
    score: float
    tfidf: float
    first_occurrence: float


def label_candidates(
    featurized: Sequence[tuple[CandidatePhrase, FeatureVector]],
    gold: Iterable[str],
    doc_id: str,
) -> list[TrainingInstance]:
    """Label each candidate positive iff its normalized form is a gold phrase.

    Gold phrases must already be normalized with the pipeline's stemmer.
    """
    gold_set = frozenset(gold)
    return [
        TrainingInstance(
            features=features,
            label=candidate.normalized in gold_set,
            doc_id=doc_id,
            normalized=candidate.normalized,
        )
        for candidate, features in featurized
    ]


def gold_coverage(
    candidates: Iterable[CandidatePhrase], gold: Iterable[str], doc_id: str
) -> CoverageReport:
    gold_set = frozenset(gold)
    found = {candidate.normalized for candidate in candidates}
    return CoverageReport(
        doc_id=doc_id, n_gold=len(gold_set), unmatched=tuple(sorted(gold_set - found))
    )


def instance_matrix(instances: Sequence[TrainingInstance]) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix (n × features) and boolean label vector."""
    X = np.array([instance.features.as_tuple() for instance in instances], dtype=np.float64)
    y = np.array([instance.label for instance in instances], dtype=bool)
    return X.reshape(len(instances), len(FEATURE_NAMES)), y


def _xlog2x(p: np.ndarray) -> np.ndarray:
    safe = np.where(p > 0, p, 1.0)
    return np.where(p > 0, p * np.log2(safe), 0.0)


def _entropy(part: np.ndarray, total: np.ndarray) -> np.ndarray:
    return -(_xlog2x(part / total) + _xlog2x((total - part) / total))


def _gain_ratios(left_pos: np.ndarray, left_n: np.ndarray, n_pos: int, n: int) -> np.ndarray:
    """Gain ratios of two-way splits given left-side counts."""
    left_pos = np.asarray(left_pos, dtype=np.float64)
    left_n = np.asarray(left_n, dtype=np.float64)
    total = np.float64(n)
    right_pos = np.float64(n_pos) - left_pos
    right_n = total - left_n

    parent = _entropy(np.float64(n_pos), total)
    children = left_n / total * _entropy(left_pos, left_n) + right_n / total * _entropy(
        right_pos, right_n
    )
    split_info = _entropy(left_n, total)
    return np.round((parent - children) / split_info, RATIO_DECIMALS)


def gain_ratio(instances: Sequence[TrainingInstance], feature: int, threshold: float) -> float:
    """Information gain of the split `x[feature] <= threshold` over its split info.

    Raises:
        ValueError: If one side of the split is empty
    """
    X, y = instance_matrix(instances)
    left = X[:, feature] <= threshold
    left_n = int(left.sum())
    if left_n == 0 or left_n == len(y):
        raise ValueError(f"threshold {threshold} leaves one side of the split empty")
    ratio = _gain_ratios(
        np.array([int(y[left].sum())]), np.array([left_n]), int(y.sum()), len(y)
    )
    return float(ratio[0])


def best_split(X: np.ndarray, y: np.ndarray, min_leaf: int) -> Optional[tuple[int, float]]:
    """Highest gain-ratio split with at least `min_leaf` instances per side.

    Thresholds are midpoints between consecutive distinct values. Ties go to
    the lower feature id, then the lower threshold; splits with a ratio of 0
    are never chosen.
    """
    n = len(y)
    n_pos = int(y.sum())
    best: Optional[tuple[int, float]] = None
    best_ratio = 0.0

    for feature in range(X.shape[1]):
        order = np.argsort(X[:, feature], kind="stable")
        xs = X[order, feature]
        cum_pos = np.cumsum(y[order])
        cuts = np.nonzero(xs[:-1] < xs[1:])[0]
        left_n = cuts + 1
        cuts = cuts[(left_n >= min_leaf) & (n - left_n >= min_leaf)]
        if cuts.size == 0:
            continue

        ratios = _gain_ratios(cum_pos[cuts], cuts + 1, n_pos, n)
        i = int(np.argmax(ratios))
        if ratios[i] > best_ratio:
            lo, hi = xs[cuts[i]], xs[cuts[i] + 1]
            mid = (lo + hi) / 2
            best_ratio = float(ratios[i])
            best = (feature, float(mid if mid < hi else lo))
    return best


def _grow(X: np.ndarray, y: np.ndarray, depth: int, max_depth: int, min_leaf: int) -> TreeNode:
    n = len(y)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == n or depth >= max_depth or n < 2 * min_leaf:
        return LeafNode(n_pos=n_pos, n_total=n)

    split = best_split(X, y, min_leaf)
    if split is None:
        return LeafNode(n_pos=n_pos, n_total=n)

    feature, threshold = split
    left = X[:, feature] <= threshold
    return SplitNode(
        feature=feature,
        threshold=threshold,
        left=_grow(X[left], y[left], depth + 1, max_depth, min_leaf),
        right=_grow(X[~left], y[~left], depth + 1, max_depth, min_leaf),
    )


def train_tree(
    instances: Sequence[TrainingInstance],
    max_depth: int = DEFAULT_MAX_DEPTH,
    min_leaf: int = DEFAULT_MIN_LEAF,
) -> TreeNode:
    """Grow one tree top-down; stops on purity, max_depth or min_leaf."""
    if not instances:
        raise ValueError("Cannot train a tree on zero instances")
    X, y = instance_matrix(instances)
    return _grow(X, y, 0, max_depth, min_leaf)


def bootstrap_sample(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, n, size=n)


def train_bagged(
    instances: Sequence[TrainingInstance],
    bags: int = DEFAULT_BAGS,
    seed: int = 13,
    training_cr: float = 0.0,
    max_depth: int = DEFAULT_MAX_DEPTH,
    min_leaf: int = DEFAULT_MIN_LEAF,
    jobs: int = 1,
    sampler: Sampler = bootstrap_sample,
) -> BaggedModel:
    """Train `bags` trees on bootstrap resamples drawn from `seed`.

    All resamples are drawn up front, so the job count cannot change the model.

    Raises:
        SingleClassError: If either class is missing from the instances
    """
    if bags < 1:
        raise ConfigurationError(f"Number of bags must be >= 1, got {bags}")
    X, y = instance_matrix(instances)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise SingleClassError(f"Training data has no positive instances ({len(y)} negatives)")
    if n_pos == len(y):
        raise SingleClassError(f"Training data has no negative instances ({n_pos} positives)")

    rng = np.random.default_rng(seed)
    samples = [sampler(len(y), rng) for _ in range(bags)]
    logger.info(f"Training {bags} trees on {len(y)} instances ({n_pos} positive)")

    trees = ordered_map(
        lambda idx: _grow(X[idx], y[idx], 0, max_depth, min_leaf), samples, jobs
    )
    return BaggedModel(
        trees=tuple(trees),
        seed=seed,
        training_cr=training_cr,
        max_depth=max_depth,
        min_leaf=min_leaf,
    )


def _leaf_for(node: TreeNode, x: Sequence[float]) -> LeafNode:
    while isinstance(node, SplitNode):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node


def predict_prob(model: BaggedModel, features: Union[FeatureVector, Sequence[float]]) -> float:
    """Mean Laplace leaf estimate over the ensemble."""
    model.check_schema()
    x = features.as_tuple() if isinstance(features, FeatureVector) else tuple(features)
    if len(x) != len(model.feature_names):
        raise SchemaMismatchError(
            f"Expected {len(model.feature_names)} features, got {len(x)}"
        )
    return math.fsum(_leaf_for(tree, x).probability for tree in model.trees) / len(model.trees)


def _is_subphrase(inner: str, outer: str) -> bool:
    return f" {inner} " in f" {outer} "


def rank_candidates(
    featurized: Sequence[tuple[CandidatePhrase, FeatureVector]], model: BaggedModel
) -> list[Keyphrase]:
    """Score every candidate; order by score, tfidf, first occurrence, normalized form."""
    scored = [
        Keyphrase(
            phrase=candidate.surface_form,
            normalized=candidate.normalized,
            score=predict_prob(model, features),
            tfidf=features.tfidf,
            first_occurrence=features.first_occurrence,
        )
        for candidate, features in featurized
    ]
    scored.sort(key=lambda kp: (-kp.score, -kp.tfidf, kp.first_occurrence, kp.normalized))
    return scored


def select_top(ranked: Sequence[Keyphrase], k: int) -> list[Keyphrase]:
    """Take the top k, skipping sub-phrases of already selected phrases."""
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    selected: list[Keyphrase] = []
    for keyphrase in ranked:
        if len(selected) == k:
            break
        if any(_is_subphrase(keyphrase.normalized, kept.normalized) for kept in selected):
            continue
        selected.append(keyphrase)
    return selected


def extract_keyphrases(
    doc: Document, model: BaggedModel, k: int, context: ExtractionContext
) -> list[Keyphrase]:
    """Top-k keyphrases of `doc`; shorter when there are fewer candidates."""
    return select_top(rank_candidates(context.featurize(doc), model), k)
