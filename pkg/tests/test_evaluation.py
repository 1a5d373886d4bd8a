"""Tests for scoring, keyphrase loss and the sweep grid."""

import random
from pathlib import Path

import pytest

from lightake.evaluation import (
    BASELINE_LABEL,
    GRID_COLUMNS,
    DocScore,
    EvalReport,
    GoldSet,
    evaluate_at,
    f1_score,
    keyphrase_loss,
    match,
    run_sweep,
    score,
)
from lightake.exceptions import ConfigurationError, MissingGoldError, MissingModelError
from lightake.learner import BaggedModel, LeafNode
from lightake.summarizer import (
    CentralityConfig,
    DistanceMetric,
    MetricKind,
    SscSpec,
    light_filter,
    rank_document,
)

PUBLISHED_GRID = Path(__file__).parent / "fixtures" / "published_grid.tsv"

# These published rows carry an F1 that does not follow from their own P and R.
INCONSISTENT_ROWS = {("10", "5", "manhattan"), ("20", "21", "euclidean")}


def _published_rows():
    for line in PUBLISHED_GRID.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        k, _, ssc, metric, _, precision, recall, f1 = line.split("\t")
        values = (float(precision), float(recall), float(f1))
        marks = []
        if (k, ssc, metric) in INCONSISTENT_ROWS:
            marks.append(pytest.mark.xfail(strict=True, reason="published F1 disagrees with P/R"))
        yield pytest.param(*values, id=f"{k}-{ssc}-{metric}", marks=marks)


def _gold(*phrases: str, doc_id: str = "d") -> GoldSet:
    return GoldSet.from_lines(doc_id, phrases)


@pytest.mark.parametrize("precision,recall,published", _published_rows())
def test_published_f1(precision, recall, published):
    """Test the F1 formula reproduces the published grid to its rounding."""
    assert f1_score(precision, recall) == pytest.approx(published, abs=0.05)


def test_f1_worked_examples():
    """Test F1 on the headline configurations to two decimals."""
    assert round(f1_score(53, 20.63), 2) == pytest.approx(29.70, abs=0.01)
    assert round(f1_score(55, 20.45), 2) == pytest.approx(29.81, abs=0.01)
    assert round(f1_score(38.00, 29.08), 2) == pytest.approx(32.95, abs=0.01)
    assert f1_score(0.0, 0.0) == 0.0


class TestMatch:
    def test_stemmed_match(self):
        """Test case, spacing and inflection are ignored."""
        assert match("Big  Cats", _gold("big cat"))

    def test_exact_match(self):
        """Test identical strings match."""
        assert match("economy", _gold("economy"))

    def test_empty(self):
        """Test the empty string never matches."""
        assert not match("", _gold("economy"))

    def test_partial_phrase(self):
        """Test a sub-phrase is not a match."""
        assert not match("cat", _gold("big cat"))


class TestScore:
    def test_counts(self):
        """Test precision over k and recall over the gold size."""
        result = score(["big cat", "dog", "mouse", "bird"], _gold("big cat", "bird", "tiger"))
        assert result.n_identified == 2
        assert result.precision == pytest.approx(2 / 4)
        assert result.recall == pytest.approx(2 / 3)
        assert result.f1 == pytest.approx(f1_score(0.5, 2 / 3))

    def test_one_to_one(self):
        """Test one gold phrase is credited once even when two variants match."""
        result = score(["big cat", "Big Cats", "dog"], _gold("big cat", "tiger"))
        assert result.n_identified == 1
        assert result.precision == pytest.approx(1 / 3)

    def test_permutation_invariant(self):
        """Test order within the top k does not matter."""
        gold = _gold("big cat", "bird", "tiger")
        extracted = ["dog", "big cat", "mouse", "bird"]
        assert score(extracted, gold) == score(list(reversed(extracted)), gold)

    def test_cutoff(self):
        """Test only the first k phrases count and short lists are penalized."""
        gold = _gold("big cat", "bird")
        assert score(["dog", "big cat", "bird"], gold, k=1).n_identified == 0
        short = score(["big cat"], gold, k=10)
        assert short.precision == pytest.approx(0.1)
        assert short.n_identified <= min(short.k, len(gold.phrases))

    def test_invalid_k(self):
        """Test k must be positive."""
        with pytest.raises(ValueError):
            score([], _gold("cat"))


class TestGoldSet:
    def test_from_lines(self):
        """Test gold lines are normalized, deduplicated and comments skipped."""
        gold = GoldSet.from_lines("d", ["# annotator 1", "Big Cats", "big cat", "", "Economy"])
        assert gold.phrases == frozenset({"big cat", "economi"})
        assert gold.max_words == 2

    def test_empty(self):
        """Test a gold file needs at least one phrase."""
        with pytest.raises(MissingGoldError):
            GoldSet.from_lines("d", ["# nothing", "  "])


FIVE_SENTENCES = (
    "Zorbil quentar rose. Mabrit velkon fell. Drusap pelmor spoke. "
    "Tiskal norvet ran. Gambol hurlin sang."
)


class TestKeyphraseLoss:
    def test_unfiltered(self, make_document):
        """Test nothing is lost without filtering."""
        document = make_document(FIVE_SENTENCES)
        assert keyphrase_loss(document, document, _gold("mabrit", "tiskal")).loss == 0.0

    def test_everything_in_removed_sentence(self, make_document):
        """Test gold confined to a removed sentence is entirely lost."""
        original = make_document(FIVE_SENTENCES)
        filtered = make_document(FIVE_SENTENCES.split(". ", 1)[1])
        report = keyphrase_loss(original, filtered, _gold("zorbil quentar", "zorbil"))
        assert report.loss == pytest.approx(100.0)

    def test_one_of_four_lost(self, make_document):
        """Test 1 of 4 locatable phrases lost is 25%, absent phrases excluded."""
        original = make_document(FIVE_SENTENCES)
        filtered = make_document(FIVE_SENTENCES.split(". ", 1)[1])
        gold = _gold("zorbil quentar", "mabrit", "drusap pelmor", "tiskal", "unknown phrase")
        report = keyphrase_loss(original, filtered, gold)
        assert report.n_locatable == 4
        assert report.n_lost == 1
        assert report.loss == pytest.approx(25.0)
        assert report.absent == ("unknown phrase",)

    def test_phrases_do_not_span_sentences(self, make_document):
        """Test a phrase split across a sentence boundary is not locatable."""
        document = make_document(FIVE_SENTENCES)
        report = keyphrase_loss(document, document, _gold("rose mabrit"))
        assert report.n_locatable == 0
        assert report.loss == 0.0


def test_report_averages():
    """Test averages are means over documents and F1 uses the averaged P and R."""
    docs = (
        DocScore(doc_id="a", k=10, n_identified=5, precision=1.0, recall=0.5, f1=2 / 3),
        DocScore(doc_id="b", k=10, n_identified=0, precision=0.0, recall=0.0, f1=0.0),
    )
    report = EvalReport(k=10, cr=0.1, ssc="10%", metric="manhattan", docs=docs)
    assert report.n_identified == pytest.approx(2.5)
    assert report.precision == pytest.approx(50.0)
    assert report.recall == pytest.approx(25.0)
    assert report.f1 == pytest.approx(f1_score(50.0, 25.0))
    assert report.row()["pct_original"] == pytest.approx(90.0)
    assert list(report.to_frame().columns) == GRID_COLUMNS


STORIES = [
    (
        "Zorbil quentar rose today. Mabrit velkon fell again. Zorbil quentar spoke twice. "
        "Tiskal norvet ran far. Gambol hurlin sang loud. Zorbil quentar left early.",
        ["zorbil quentar", "mabrit velkon"],
    ),
    (
        "Drusap pelmor met yestra. Kopmar frenzo waited. Drusap pelmor agreed quickly. "
        "Balvik wostel argued. Crinap gambol slept. Drusap pelmor signed papers.",
        ["drusap pelmor", "balvik wostel"],
    ),
    (
        "Hurlin yestra opened talks. Norvet tiskal closed shops. Hurlin yestra praised workers. "
        "Frenzo kopmar objected. Wostel balvik cheered. Hurlin yestra thanked everyone.",
        ["hurlin yestra", "frenzo kopmar"],
    ),
]


@pytest.fixture
def stories(make_document):
    return [
        (make_document(text, f"s{i}"), GoldSet.from_lines(f"s{i}", gold))
        for i, (text, gold) in enumerate(STORIES)
    ]


@pytest.fixture
def extractors(stories, make_context):
    context = make_context(*(document for document, _ in stories))
    tree = LeafNode(n_pos=1, n_total=2)
    return {
        cr: (BaggedModel(trees=(tree,), seed=0, training_cr=cr), context) for cr in (0.0, 0.2)
    }


def _configs():
    return [
        CentralityConfig(metric=DistanceMetric(kind=kind), ssc=SscSpec.parse(ssc))
        for kind, ssc in [(MetricKind.MANHATTAN, "20%"), (MetricKind.COSINE, "2")]
    ]


class TestSweep:
    def test_baseline_only(self, stories, extractors):
        """Test a sweep over cr=0 equals plain evaluation."""
        result = run_sweep(stories, [0.0], _configs(), [5, 10], extractors)
        reports, loss = evaluate_at(stories, extractors[0.0], 0.0, _configs()[0], [5, 10])
        assert result.reports == tuple(reports)
        assert result.losses == (loss,)
        assert loss.loss == 0.0
        assert all(r.ssc == BASELINE_LABEL and r.metric == BASELINE_LABEL for r in reports)

    def test_grid_shape(self, stories, extractors):
        """Test one baseline row per k plus one row per (config, cr, k)."""
        result = run_sweep(stories, [0.2], _configs(), [5, 10], extractors)
        frame = result.to_frame()
        assert len(frame) == 2 + 2 * 1 * 2
        assert list(frame.columns) == GRID_COLUMNS
        assert list(frame["pct_original"][:2]) == [100.0, 100.0]
        assert set(frame["ssc"][2:]) == {"20%", "2"}
        assert len(result.loss_frame()) == 3

    def test_duplicated_stories(self, stories, extractors):
        """Test duplicating every test story leaves the averages unchanged."""
        once = run_sweep(stories, [0.2], _configs(), [5], extractors).to_frame()
        twice = run_sweep(stories + stories, [0.2], _configs(), [5], extractors).to_frame()
        for column in ["n_ident", "P", "R", "F1"]:
            assert list(twice[column]) == pytest.approx(list(once[column]))

    def test_job_count_does_not_change_output(self, stories, extractors):
        """Test the grid is identical for any number of workers."""
        sequential = run_sweep(stories, [0.2], _configs(), [5], extractors, jobs=1)
        parallel = run_sweep(stories, [0.2], _configs(), [5], extractors, jobs=3)
        assert sequential.grid_tsv() == parallel.grid_tsv()

    def test_missing_model(self, stories, extractors):
        """Test every cr needs a model trained at that cr."""
        with pytest.raises(MissingModelError, match="0.3"):
            run_sweep(stories, [0.3], _configs(), [5], extractors)

    def test_no_configs(self, stories, extractors):
        """Test at least one filter configuration is required."""
        with pytest.raises(ConfigurationError):
            run_sweep(stories, [0.2], [], [5], extractors)

    def test_write(self, stories, extractors, tmp_path):
        """Test the sweep writes the grid, the loss table and the pretty table."""
        result = run_sweep(stories, [0.2], _configs(), [5], extractors, provenance={"seed": 13})
        paths = result.write(tmp_path / "out")
        assert sorted(path.name for path in paths) == ["grid.tsv", "grid.txt", "loss.tsv"]
        lines = (tmp_path / "out" / "grid.tsv").read_text().splitlines()
        assert lines[0] == '# config: {"seed": 13}'
        assert lines[1].split("\t") == GRID_COLUMNS


LOSS_WORDS = [
    "zorbil", "quentar", "mabrit", "velkon", "drusap", "pelmor", "tiskal", "norvet",
    "gambol", "hurlin", "yestra", "kopmar", "frenzo", "balvik", "wostel", "crinap",
]


@pytest.mark.parametrize("metric", ["manhattan", "cosine"])
def test_loss_grows_with_cr(make_document, metric):
    """Test keyphrase loss never decreases as nested kept sets shrink."""
    rng = random.Random(sum(map(ord, metric)))
    config = CentralityConfig(
        metric=DistanceMetric(kind=MetricKind(metric)), ssc=SscSpec.parse("20%")
    )
    for trial in range(20):
        n_sentences = rng.randint(12, 20)
        sentences = [rng.sample(LOSS_WORDS, rng.randint(3, 7)) for _ in range(n_sentences)]
        document = make_document(" ".join(" ".join(s).capitalize() + "." for s in sentences))
        phrases = []
        for words in rng.sample(sentences, 4):
            start = rng.randrange(len(words) - 1)
            phrases.append(" ".join(words[start:start + 2]))
        gold = GoldSet.from_lines(f"t{trial}", phrases)

        ranking = rank_document(document, config)
        losses = [
            keyphrase_loss(
                document, light_filter(document, cr, config, ranking=ranking).document, gold
            ).loss
            for cr in (0.0, 0.1, 0.2, 0.3, 0.5)
        ]
        assert losses == sorted(losses)
