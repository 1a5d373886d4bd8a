"""Tests for the gain-ratio trees, bagging and keyphrase ranking."""

import math
import random

import numpy as np
import pytest

from lightake.ake import FeatureVector
from lightake.exceptions import ConfigurationError, SchemaMismatchError, SingleClassError
from lightake.learner import (
    RATIO_DECIMALS,
    BaggedModel,
    Keyphrase,
    LeafNode,
    SplitNode,
    TrainingInstance,
    best_split,
    extract_keyphrases,
    gain_ratio,
    gold_coverage,
    instance_matrix,
    label_candidates,
    predict_prob,
    rank_candidates,
    select_top,
    train_bagged,
    train_tree,
)
from lightake.textcore import normalize_phrase


def _features(tfidf: float = 0.0, first: float = 0.0) -> FeatureVector:
    return FeatureVector(
        tfidf=tfidf,
        first_occurrence=first,
        n_words=1,
        n_chars=3,
        n_named_entities=0,
        n_capital_letters=0,
        n_pos_tags=1,
        lm_logprob=-1.0,
    )


def _instances(points, labels) -> list[TrainingInstance]:
    instances = []
    for i, (point, label) in enumerate(zip(points, labels)):
        tfidf, first = point if isinstance(point, tuple) else (point, 0.0)
        instances.append(
            TrainingInstance(
                features=_features(tfidf, first), label=label, doc_id="d", normalized=f"w{i}"
            )
        )
    return instances


def _entropy(pos: int, n: int) -> float:
    return -sum(p * math.log2(p) for p in (pos / n, (n - pos) / n) if p > 0)


def _oracle_root_split(points, labels, min_leaf):
    n, n_pos = len(labels), sum(labels)
    best, best_ratio = None, 0.0
    for feature in (0, 1):
        values = sorted({point[feature] for point in points})
        for lo, hi in zip(values, values[1:]):
            threshold = (lo + hi) / 2
            left = [label for point, label in zip(points, labels) if point[feature] <= threshold]
            if len(left) < min_leaf or n - len(left) < min_leaf:
                continue
            left_pos = sum(left)
            children = len(left) / n * _entropy(left_pos, len(left)) + (n - len(left)) / n * (
                _entropy(n_pos - left_pos, n - len(left))
            )
            ratio = round((_entropy(n_pos, n) - children) / _entropy(len(left), n), RATIO_DECIMALS)
            if ratio > best_ratio:
                best, best_ratio = (feature, threshold), ratio
    return best


ONE_D = ([0.0, 1.0, 2.0, 3.0], [False, False, True, True])


class TestGainRatio:
    def test_perfect_split(self):
        """Test a 2+2 separating split has ratio 1."""
        assert gain_ratio(_instances(*ONE_D), 0, 1.5) == pytest.approx(1.0)

    def test_uninformative_split(self):
        """Test equal class ratios on both sides give ratio 0."""
        instances = _instances([0.0, 1.0, 2.0, 3.0], [False, True, False, True])
        assert gain_ratio(instances, 0, 1.5) == pytest.approx(0.0)

    def test_unbalanced_split(self):
        """Test a 1+3 split by hand entropy arithmetic."""
        instances = _instances([0.0, 1.0, 2.0, 3.0], [True, False, False, False])
        gain = _entropy(1, 4)
        split_info = _entropy(1, 4)
        assert gain_ratio(instances, 0, 0.5) == pytest.approx(gain / split_info)

    def test_empty_side(self):
        """Test degenerate splits are rejected."""
        with pytest.raises(ValueError):
            gain_ratio(_instances(*ONE_D), 0, 10.0)

    def test_single_class_has_no_split(self):
        """Test no split is chosen for a pure node."""
        X, y = instance_matrix(_instances([0.0, 1.0, 2.0, 3.0], [True] * 4))
        assert best_split(X, y, min_leaf=1) is None


class TestTree:
    def test_one_dimensional_split(self):
        """Test separable 1D data splits once at 1.5."""
        tree = train_tree(_instances(*ONE_D))
        assert isinstance(tree, SplitNode)
        assert tree.feature == 0
        assert tree.threshold == pytest.approx(1.5)
        assert tree.left == LeafNode(n_pos=0, n_total=2)
        assert tree.right == LeafNode(n_pos=2, n_total=2)

    def test_identical_vectors(self):
        """Test identical feature vectors with mixed labels give one leaf."""
        tree = train_tree(_instances([1.0] * 5, [True, False, True, False, False]))
        assert tree == LeafNode(n_pos=2, n_total=5)

    def test_pure_input(self):
        """Test pure input is a leaf."""
        assert train_tree(_instances([0.0, 1.0, 2.0], [False] * 3)) == LeafNode(
            n_pos=0, n_total=3
        )

    def test_max_depth(self):
        """Test depth 0 forces a leaf."""
        assert isinstance(train_tree(_instances(*ONE_D), max_depth=0), LeafNode)

    def test_min_leaf(self):
        """Test the best split is skipped when it leaves fewer than min_leaf on a side."""
        instances = _instances([0.0, 1.0, 2.0, 3.0], [True, False, False, False])
        tree = train_tree(instances, min_leaf=2)
        assert isinstance(tree, SplitNode) and tree.threshold == pytest.approx(1.5)
        tree = train_tree(instances, min_leaf=1)
        assert isinstance(tree, SplitNode) and tree.threshold == pytest.approx(0.5)

    def test_root_split_matches_exhaustive_search(self):
        """Test the root split against brute force over all feature/threshold pairs."""
        rng = random.Random(23)
        for _ in range(200):
            n = rng.randint(2, 20)
            points = [
                (float(rng.randint(0, 3)), rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))
                for _ in range(n)
            ]
            labels = [rng.random() < 0.4 for _ in range(n)]
            min_leaf = rng.choice([1, 2])
            X, y = instance_matrix(_instances(points, labels))
            assert best_split(X, y, min_leaf) == _oracle_root_split(points, labels, min_leaf)


class TestBagging:
    def test_identity_sampler_reduces_to_one_tree(self):
        """Test one bag over the full data equals a single tree."""
        rng = random.Random(3)
        points = [(float(rng.randint(0, 5)), rng.random()) for _ in range(30)]
        labels = [p[0] + p[1] > 3 for p in points]
        instances = _instances(points, labels)
        model = train_bagged(instances, bags=1, sampler=lambda n, _rng: np.arange(n))
        assert model.trees == (train_tree(instances),)

    def test_deterministic_across_jobs(self):
        """Test the same seed gives identical serialized models for any job count."""
        rng = random.Random(4)
        points = [(float(rng.randint(0, 9)), rng.random()) for _ in range(60)]
        instances = _instances(points, [p[0] > 5 for p in points])
        first = train_bagged(instances, bags=10, seed=42, jobs=1).model_dump_json()
        assert train_bagged(instances, bags=10, seed=42, jobs=1).model_dump_json() == first
        assert train_bagged(instances, bags=10, seed=42, jobs=4).model_dump_json() == first

    def test_separable_data(self):
        """Test bagged trees rank the positive end above the negative end."""
        points = [float(x) for x in range(8)]
        model = train_bagged(_instances(points, [x >= 4 for x in points]), bags=10, seed=1)
        assert predict_prob(model, _features(7.0)) > predict_prob(model, _features(0.0))

    def test_single_class(self):
        """Test single-class data is refused with the missing class named."""
        with pytest.raises(SingleClassError, match="positive"):
            train_bagged(_instances([0.0, 1.0], [False, False]))
        with pytest.raises(SingleClassError, match="negative"):
            train_bagged(_instances([0.0, 1.0], [True, True]))

    def test_invalid_bags(self):
        """Test at least one bag is required."""
        with pytest.raises(ConfigurationError):
            train_bagged(_instances(*ONE_D), bags=0)

    def test_model_json_round_trip(self):
        """Test models reload with the same trees."""
        model = train_bagged(_instances(*ONE_D), bags=3, seed=5, training_cr=0.1)
        assert BaggedModel.model_validate_json(model.model_dump_json()) == model


class TestPrediction:
    def test_laplace_leaves(self):
        """Test the Laplace estimate and the ensemble mean."""
        empty, full = LeafNode(n_pos=0, n_total=2), LeafNode(n_pos=2, n_total=2)
        assert empty.probability == pytest.approx(1 / 4)
        assert full.probability == pytest.approx(3 / 4)
        model = BaggedModel(trees=(empty, full), seed=0, training_cr=0.0)
        assert predict_prob(model, _features()) == pytest.approx(0.5)

    def test_probability_bounds(self):
        """Test predictions lie strictly inside (0, 1)."""
        model = train_bagged(_instances(*ONE_D), bags=5, seed=2)
        for x in (-5.0, 0.0, 1.5, 3.0, 100.0):
            assert 0.0 < predict_prob(model, _features(max(x, 0.0))) < 1.0

    def test_schema_mismatch(self):
        """Test models with another feature schema are refused."""
        model = BaggedModel(
            schema_version="other/v0",
            trees=(LeafNode(n_pos=0, n_total=1),),
            seed=0,
            training_cr=0.0,
        )
        with pytest.raises(SchemaMismatchError):
            predict_prob(model, _features())
        current = BaggedModel(trees=(LeafNode(n_pos=0, n_total=1),), seed=0, training_cr=0.0)
        with pytest.raises(SchemaMismatchError):
            predict_prob(current, [0.0, 1.0])


def _keyphrase(normalized: str, score: float) -> Keyphrase:
    return Keyphrase(
        phrase=normalized, normalized=normalized, score=score, tfidf=0.0, first_occurrence=0.0
    )


class TestSelection:
    def test_subphrase_suppression(self):
        """Test a selected phrase suppresses its sub-phrases only."""
        ranked = [
            _keyphrase("big cat", 0.9),
            _keyphrase("cat", 0.8),
            _keyphrase("ca", 0.75),
            _keyphrase("dog", 0.7),
        ]
        assert [kp.normalized for kp in select_top(ranked, 3)] == ["big cat", "ca", "dog"]

    def test_short_list(self):
        """Test k larger than the candidate count returns everything."""
        assert len(select_top([_keyphrase("cat", 0.5)], 10)) == 1

    def test_invalid_k(self):
        """Test k must be positive."""
        with pytest.raises(ConfigurationError):
            select_top([], 0)

    def test_rank_order(self, make_document, make_context):
        """Test ties in score fall back to tfidf, first occurrence and normalized form."""
        document = make_document(
            "Zorbil quentar mabrit. Velkon zorbil drusap. Pelmor zorbil quentar tiskal."
        )
        context = make_context(document)
        model = BaggedModel(trees=(LeafNode(n_pos=1, n_total=2),), seed=0, training_cr=0.0)
        ranked = rank_candidates(context.featurize(document), model)
        keys = [(-kp.score, -kp.tfidf, kp.first_occurrence, kp.normalized) for kp in ranked]
        assert keys == sorted(keys)
        assert ranked[0].normalized == "zorbil"


class TestExtraction:
    def test_top_k(self, make_document, make_context):
        """Test exactly k phrases when enough candidates exist."""
        document = make_document(
            "Zorbil quentar mabrit velkon. Drusap pelmor tiskal norvet. "
            "Gambol hurlin yestra kopmar. Frenzo balvik wostel crinap."
        )
        context = make_context(document)
        model = train_bagged(_instances(*ONE_D), bags=3, seed=1)
        assert len(extract_keyphrases(document, model, 10, context)) == 10
        assert extract_keyphrases(document, model, 10, context) == extract_keyphrases(
            document, model, 10, context
        )

    def test_no_candidates(self, make_document, make_context):
        """Test an all-stopword story gives no keyphrases."""
        document = make_document("It is what it is.")
        context = make_context(make_document("Zorbil quentar."), document)
        model = train_bagged(_instances(*ONE_D), bags=1, seed=1)
        assert extract_keyphrases(document, model, 10, context) == []


class TestLabels:
    def test_label_candidates(self, make_document, make_context):
        """Test stemmed gold matching labels candidates."""
        document = make_document("The big cats slept.")
        featurized = make_context(document).featurize(document)
        gold = [normalize_phrase("big cat"), normalize_phrase("tiger")]
        instances = label_candidates(featurized, gold, "d")
        positives = {i.normalized for i in instances if i.label}
        assert positives == {"big cat"}

        coverage = gold_coverage([c for c, _ in featurized], gold, "d")
        assert coverage.unmatched == ("tiger",)
        assert coverage.n_matched == 1

    def test_no_gold_overlap(self, make_document, make_context):
        """Test candidates are all negative without matching gold."""
        document = make_document("Zorbil quentar.")
        instances = label_candidates(make_context(document).featurize(document), ["tiger"], "d")
        assert instances and not any(i.label for i in instances)
