"""Composition of filtering, feature extraction, training and evaluation."""

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import BaseModel, ConfigDict, ValidationError

from .ake import ExtractionContext, PosLexicon
from .config import PipelineConfig
from .corpus import CorpusLayout
from .evaluation import EvalReport, GoldSet, LossSummary, SweepResult, evaluate_at, run_sweep
from .exceptions import (
    CorpusIOError,
    MissingModelError,
    ModelError,
    NoPositivesError,
    TrainingCrMismatchError,
)
from .langmodel import DomainLM
from .learner import (
    BaggedModel,
    Keyphrase,
    TrainingInstance,
    extract_keyphrases,
    gold_coverage,
    label_candidates,
    train_bagged,
)
from .parallel import ordered_map
from .store import CONFIDENCE_THRESHOLD, IndexRecord, RecordKeyphrase
from .summarizer import FilterResult, length_filter, light_filter, rank_document
from .textcore import Document, IdfTable, TextAnalyzer, build_idf

logger = logging.getLogger(__name__)

MODEL_FORMAT = "lightake-model/v1"
LM_SUFFIX = ".lm"

AnnotatedStories = Sequence[tuple[Document, GoldSet]]


class KeyphraseModel(BaseModel):
    """Trained classifier with the corpus statistics its features depend on."""

    model_config = ConfigDict(frozen=True)

    format_version: str = MODEL_FORMAT
    classifier: BaggedModel
    idf: IdfTable
    language: str
    max_phrase_len: int
    config: dict[str, Any] = {}

    @property
    def training_cr(self) -> float:
        return self.classifier.training_cr

    def save(self, path: Path) -> None:
        try:
            Path(path).write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise CorpusIOError(f"Cannot write model {path}: {e}") from e
        logger.info(f"Model written to {path}")

    @classmethod
    def load(cls, path: Path) -> "KeyphraseModel":
        """Read and validate a model file.

        Raises:
            CorpusIOError: If the file cannot be read
            ModelError: If it is not a compatible model
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise CorpusIOError(f"Cannot read model {path}: {e}") from e
        try:
            model = cls.model_validate_json(text)
        except ValidationError as e:
            raise ModelError(f"{path} is not a valid lightake model: {e}") from e
        if model.format_version != MODEL_FORMAT:
            raise ModelError(f"Unsupported model format {model.format_version!r} in {path}")
        model.classifier.check_schema()
        return model


def companion_lm_path(model_path: Path) -> Path:
    """Language model written alongside a model trained without one."""
    return Path(str(model_path) + LM_SUFFIX)


def load_pos_lexicon(config: PipelineConfig) -> PosLexicon:
    if config.pos_lexicon_path:
        return PosLexicon.load(config.pos_lexicon_path, config.language)
    return PosLexicon.bundled(config.language)


def train_lm(documents: Sequence[Document]) -> DomainLM:
    """Domain model over the stems of the given documents."""
    return DomainLM.train(
        sentence.stems for document in documents for sentence in document.sentences
    )


def check_cr(model: KeyphraseModel, cr: float, override: bool = False) -> None:
    """Refuse to apply a model at a CR other than the one it was trained at."""
    if abs(cr - model.training_cr) <= 1e-12:
        return
    if not override:
        raise TrainingCrMismatchError(
            f"Model was trained at cr={model.training_cr:g}, refusing to apply it at "
            f"cr={cr:g} (use --override-cr to force)"
        )
    logger.warning(f"Applying model trained at cr={model.training_cr:g} at cr={cr:g}")


def extraction_context(
    model: KeyphraseModel, lm: DomainLM, pos: PosLexicon, stopwords: frozenset[str]
) -> ExtractionContext:
    return ExtractionContext(
        idf=model.idf, lm=lm, pos=pos, stopwords=stopwords, max_phrase_len=model.max_phrase_len
    )


def train_model(
    stories: AnnotatedStories,
    config: PipelineConfig,
    lm: DomainLM,
    pos: PosLexicon,
    stopwords: frozenset[str],
    cr: Optional[float] = None,
) -> KeyphraseModel:
    """Filter the training stories at `cr`, label their candidates and train the ensemble.

    Raises:
        NoPositivesError: If no candidate matches any gold keyphrase
    """
    cr = config.cr if cr is None else cr
    centrality = config.centrality()
    if not stories:
        raise NoPositivesError("No annotated training stories")

    filtered = ordered_map(
        lambda story: light_filter(story[0], cr, centrality, stopwords).document,
        stories,
        config.jobs,
    )
    idf = build_idf(filtered, unit="document")
    context = ExtractionContext(
        idf=idf, lm=lm, pos=pos, stopwords=stopwords, max_phrase_len=config.max_phrase_len
    )

    def instances_for(i: int) -> list[TrainingInstance]:
        document, gold = filtered[i], stories[i][1]
        featurized = context.featurize(document)
        coverage = gold_coverage((c for c, _ in featurized), gold.phrases, gold.doc_id)
        if coverage.unmatched:
            logger.debug(f"{gold.doc_id}: gold not among candidates: {list(coverage.unmatched)}")
        return label_candidates(featurized, gold.phrases, gold.doc_id)

    instances = [
        instance
        for batch in ordered_map(instances_for, range(len(filtered)), config.jobs)
        for instance in batch
    ]
    n_pos = sum(instance.label for instance in instances)
    n_gold = sum(len(gold.phrases) for _, gold in stories)
    logger.info(f"Candidates cover {n_pos} of {n_gold} gold keyphrases at cr={cr:g}")
    if n_pos == 0:
        raise NoPositivesError(
            f"No candidate in {len(stories)} training stories matches a gold keyphrase; "
            "check that .key files use phrases that occur in the story text"
        )

    classifier = train_bagged(
        instances,
        bags=config.bags,
        seed=config.seed,
        training_cr=cr,
        max_depth=config.max_depth,
        min_leaf=config.min_leaf,
        jobs=config.jobs,
    )
    return KeyphraseModel(
        classifier=classifier,
        idf=idf,
        language=config.language,
        max_phrase_len=config.max_phrase_len,
        config={**config.provenance(), "cr": cr},
    )


@dataclass
class Pipeline:
    """Filter → extract → index record composition around one trained model."""

    config: PipelineConfig
    model: KeyphraseModel
    lm: DomainLM
    analyzer: TextAnalyzer
    pos: PosLexicon

    @classmethod
    def load(cls, config: PipelineConfig, model_path: Optional[Path] = None) -> "Pipeline":
        """Load the model, its language model and the text resources named by `config`.

        Raises:
            MissingModelError: If no model path is configured
            ModelError: If the model's language differs from the configured one
        """
        model_path = model_path or config.model_path
        if model_path is None:
            raise MissingModelError("No model given (set --model or LIGHTAKE_MODEL_PATH)")
        model = KeyphraseModel.load(model_path)
        if model.language != config.language:
            raise ModelError(
                f"Model {model_path} was trained for {model.language!r}, "
                f"configured language is {config.language!r}"
            )
        lm_path = config.lm_path or companion_lm_path(model_path)
        return cls(
            config=config,
            model=model,
            lm=DomainLM.load(lm_path),
            analyzer=TextAnalyzer.from_config(config),
            pos=load_pos_lexicon(config),
        )

    @property
    def stopwords(self) -> frozenset[str]:
        return self.analyzer.stopwords

    @property
    def context(self) -> ExtractionContext:
        return extraction_context(self.model, self.lm, self.pos, self.stopwords)

    def resolve_cr(self, cr: Optional[float] = None) -> float:
        """CR to filter at: the model's training CR unless overridden."""
        if cr is None:
            return self.model.training_cr
        check_cr(self.model, cr, self.config.override_cr)
        return cr

    def filter(self, document: Document, cr: Optional[float] = None) -> FilterResult:
        return light_filter(
            document, self.resolve_cr(cr), self.config.centrality(), self.stopwords
        )

    def extract(self, document: Document, k: Optional[int] = None) -> list[Keyphrase]:
        """Top-k keyphrases of an already filtered document."""
        return extract_keyphrases(
            document, self.model.classifier, k or self.config.k, self.context
        )

    def process_story(
        self, doc_id: str, text: str, k: Optional[int] = None, cr: Optional[float] = None
    ) -> IndexRecord:
        """Run one story through the whole pipeline.

        The story is filtered at the model's CR for extraction, and a heavier
        summary (summary_cr or summary_sentences) is kept for display.
        """
        k = k or self.config.k
        cr = self.resolve_cr(cr)
        centrality = self.config.centrality()
        timings: dict[str, float] = {}

        start = time.perf_counter()
        document = self.analyzer.analyze(doc_id, text)
        timings["analyze"] = _elapsed_ms(start)

        start = time.perf_counter()
        ranking = rank_document(document, centrality, self.stopwords)
        filtered = light_filter(document, cr, centrality, self.stopwords, ranking)
        timings["filter"] = _elapsed_ms(start)

        start = time.perf_counter()
        keyphrases = self.extract(filtered.document, k)
        timings["extract"] = _elapsed_ms(start)

        start = time.perf_counter()
        if self.config.summary_sentences:
            summary = length_filter(
                document, self.config.summary_sentences, centrality, self.stopwords, ranking
            )
        else:
            summary = light_filter(
                document, self.config.summary_cr, centrality, self.stopwords, ranking
            )
        timings["summary"] = _elapsed_ms(start)

        return IndexRecord(
            doc_id=doc_id,
            keyphrases=tuple(
                RecordKeyphrase(
                    phrase=kp.phrase,
                    normalized=kp.normalized,
                    score=kp.score,
                    low_confidence=kp.score < CONFIDENCE_THRESHOLD,
                )
                for kp in keyphrases
            ),
            cr=cr,
            k=k,
            timings_ms=timings,
            summary=tuple(sentence.text for sentence in summary.document.sentences),
            config=self.config.provenance(),
        )

    def evaluate(
        self, stories: AnnotatedStories, ks: Sequence[int], cr: Optional[float] = None
    ) -> tuple[list[EvalReport], LossSummary]:
        """Score the model on annotated stories filtered at `cr`."""
        cr = self.resolve_cr(cr)
        return evaluate_at(
            stories,
            (self.model.classifier, self.context),
            cr,
            self.config.centrality(),
            ks,
            self.stopwords,
            self.config.language,
            self.config.jobs,
        )


def _elapsed_ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000.0, 3)


class ModelCache:
    """Trained models keyed by CR, so each CR is trained at most once."""

    def __init__(
        self,
        stories: AnnotatedStories,
        config: PipelineConfig,
        lm: DomainLM,
        pos: PosLexicon,
        stopwords: frozenset[str],
    ):
        self.stories = stories
        self.config = config
        self.lm = lm
        self.pos = pos
        self.stopwords = stopwords
        self._models: dict[float, KeyphraseModel] = {}

    def get(self, cr: float) -> KeyphraseModel:
        if cr in self._models:
            logger.info(f"Model cache hit for cr={cr:g}")
        else:
            logger.info(f"Training model for cr={cr:g}")
            self._models[cr] = train_model(
                self.stories, self.config, self.lm, self.pos, self.stopwords, cr
            )
        return self._models[cr]


def sweep(
    corpus_root: Path,
    config: PipelineConfig,
    crs: Sequence[float],
    metrics: Sequence[str],
    sscs: Sequence[str],
    ks: Sequence[int],
) -> SweepResult:
    """Train one model per CR on `<root>/train` and evaluate the grid on `<root>/test`."""
    analyzer = TextAnalyzer.from_config(config)
    pos = load_pos_lexicon(config)
    train_layout, test_layout = CorpusLayout.split(corpus_root)
    train = train_layout.load_annotated(analyzer)
    test = test_layout.load_annotated(analyzer)

    lm = DomainLM.load(config.lm_path) if config.lm_path else train_lm([doc for doc, _ in train])
    cache = ModelCache(train, config, lm, pos, analyzer.stopwords)
    all_crs = [0.0] + sorted({float(cr) for cr in crs if cr != 0})

    extractors = {}
    for cr in all_crs:
        model = cache.get(cr)
        extractors[cr] = (model.classifier, extraction_context(model, lm, pos, analyzer.stopwords))

    configs = [config.centrality_for(metric, ssc) for metric in metrics for ssc in sscs]
    return run_sweep(
        test,
        all_crs,
        configs,
        ks,
        extractors,
        analyzer.stopwords,
        config.language,
        config.jobs,
        provenance=config.provenance(),
    )
