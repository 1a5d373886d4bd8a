"""Precision/recall evaluation, keyphrase loss and the compression sweep grid."""

import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from .ake import ExtractionContext
from .exceptions import ConfigurationError, CorpusIOError, MissingGoldError, MissingModelError
from .learner import BaggedModel, rank_candidates, select_top
from .parallel import ordered_map
from .summarizer import CentralityConfig, CentralityRanking, light_filter, rank_document
from .textcore import Document, normalize_phrase

logger = logging.getLogger(__name__)

GRID_COLUMNS = ["k", "pct_original", "ssc", "metric", "n_ident", "P", "R", "F1"]
LOSS_COLUMNS = ["cr", "pct_original", "ssc", "metric", "loss", "n_docs", "n_absent"]
BASELINE_LABEL = "-"


class GoldSet(BaseModel):
    """Normalized gold keyphrases of one story."""

    model_config = ConfigDict(frozen=True)

    doc_id: str
    phrases: frozenset[str] = Field(min_length=1)

    @classmethod
    def from_lines(cls, doc_id: str, lines: Iterable[str], lang: str = "en") -> "GoldSet":
        """Normalize raw gold lines; blank and `#` lines are skipped.

        Raises:
            MissingGoldError: If no usable phrase remains
        """
        phrases = set()
        for line in lines:
            line = line.strip()
            if line and not line.startswith("#"):
                normalized = normalize_phrase(line, lang)
                if normalized:
                    phrases.add(normalized)
        if not phrases:
            raise MissingGoldError(f"Story {doc_id!r} has no gold keyphrases")
        return cls(doc_id=doc_id, phrases=frozenset(phrases))

    @property
    def max_words(self) -> int:
        return max(len(phrase.split()) for phrase in self.phrases)


class DocScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str
    k: int
    n_identified: int
    precision: float
    recall: float
    f1: float


class LossReport(BaseModel):
    """Gold phrases present in the original story but gone after filtering."""

    model_config = ConfigDict(frozen=True)

    doc_id: str
    n_locatable: int
    n_lost: int
    absent: tuple[str, ...] = ()

    @property
    def loss(self) -> float:
        """Percentage of locatable gold phrases lost."""
        return 100.0 * self.n_lost / self.n_locatable if self.n_locatable else 0.0


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def match(extracted: str, gold: GoldSet, lang: str = "en") -> bool:
    """Stemmed exact match of an extracted phrase against any gold phrase."""
    normalized = normalize_phrase(extracted, lang)
    return bool(normalized) and normalized in gold.phrases


def score(
    extracted: Sequence[str], gold: GoldSet, k: Optional[int] = None, lang: str = "en"
) -> DocScore:
    """Score an extracted list at cutoff k (defaults to the list length).

    Each gold phrase is credited at most once.
    """
    k = len(extracted) if k is None else k
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    found = {normalize_phrase(phrase, lang) for phrase in extracted[:k]}
    n_identified = len(found & gold.phrases)
    precision = n_identified / k
    recall = n_identified / len(gold.phrases)
    return DocScore(
        doc_id=gold.doc_id,
        k=k,
        n_identified=n_identified,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
    )


def _ngrams(document: Document, max_n: int) -> set[str]:
    grams = set()
    for sentence in document.sentences:
        stems = sentence.stems
        for n in range(1, max_n + 1):
            for start in range(len(stems) - n + 1):
                grams.add(" ".join(stems[start:start + n]))
    return grams


def keyphrase_loss(original: Document, filtered: Document, gold: GoldSet) -> LossReport:
    """Share of gold phrases locatable in `original` that `filtered` no longer contains.

    Gold phrases absent from the original are left out of the denominator
    and listed in `absent`.
    """
    max_n = gold.max_words
    before = _ngrams(original, max_n)
    after = _ngrams(filtered, max_n)
    locatable = gold.phrases & before
    return LossReport(
        doc_id=gold.doc_id,
        n_locatable=len(locatable),
        n_lost=len(locatable - after),
        absent=tuple(sorted(gold.phrases - before)),
    )


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


class EvalReport(BaseModel):
    """Per-document scores and corpus averages for one (cr, config, k) cell."""

    model_config = ConfigDict(frozen=True)

    k: int
    cr: float
    ssc: str
    metric: str
    docs: tuple[DocScore, ...]

    @property
    def n_identified(self) -> float:
        return _mean([doc.n_identified for doc in self.docs])

    @property
    def precision(self) -> float:
        """Average precision in percent."""
        return 100.0 * _mean([doc.precision for doc in self.docs])

    @property
    def recall(self) -> float:
        return 100.0 * _mean([doc.recall for doc in self.docs])

    @property
    def f1(self) -> float:
        """F1 of the averaged precision and recall."""
        return f1_score(self.precision, self.recall)

    def row(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "pct_original": 100.0 * (1.0 - self.cr),
            "ssc": self.ssc,
            "metric": self.metric,
            "n_ident": self.n_identified,
            "P": self.precision,
            "R": self.recall,
            "F1": self.f1,
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.row()], columns=GRID_COLUMNS)

    def docs_frame(self) -> pd.DataFrame:
        return pd.DataFrame([doc.model_dump() for doc in self.docs])


class LossSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    cr: float
    ssc: str
    metric: str
    docs: tuple[LossReport, ...]

    @property
    def loss(self) -> float:
        """Average per-story loss in percent."""
        return _mean([doc.loss for doc in self.docs if doc.n_locatable])

    def row(self) -> dict[str, Any]:
        return {
            "cr": self.cr,
            "pct_original": 100.0 * (1.0 - self.cr),
            "ssc": self.ssc,
            "metric": self.metric,
            "loss": self.loss,
            "n_docs": len(self.docs),
            "n_absent": sum(len(doc.absent) for doc in self.docs),
        }


class SweepResult(BaseModel):
    """Grid of evaluation cells plus keyphrase loss per (cr, config)."""

    model_config = ConfigDict(frozen=True)

    reports: tuple[EvalReport, ...]
    losses: tuple[LossSummary, ...]
    config: dict[str, Any] = {}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([report.row() for report in self.reports], columns=GRID_COLUMNS)

    def loss_frame(self) -> pd.DataFrame:
        return pd.DataFrame([loss.row() for loss in self.losses], columns=LOSS_COLUMNS)

    def _header(self) -> str:
        return f"# config: {json.dumps(self.config, sort_keys=True)}\n"

    def grid_tsv(self) -> str:
        return self._header() + self.to_frame().to_csv(sep="\t", index=False, float_format="%.2f")

    def loss_tsv(self) -> str:
        return self._header() + self.loss_frame().to_csv(sep="\t", index=False, float_format="%.2f")

    def pretty(self) -> str:
        return self.to_frame().to_string(index=False, float_format=lambda v: f"{v:.2f}")

    def write(self, out_dir: Path) -> list[Path]:
        """Write grid.tsv, loss.tsv and grid.txt into `out_dir`."""
        out_dir = Path(out_dir)
        outputs = {
            out_dir / "grid.tsv": self.grid_tsv(),
            out_dir / "loss.tsv": self.loss_tsv(),
            out_dir / "grid.txt": self._header() + self.pretty() + "\n",
        }
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            for path, text in outputs.items():
                path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise CorpusIOError(f"Cannot write sweep results to {out_dir}: {e}") from e
        logger.info(f"Sweep results written to {out_dir}")
        return list(outputs)


Extractor = tuple[BaggedModel, ExtractionContext]


def _doc_scores(
    document: Document, gold: GoldSet, extractor: Extractor, ks: Sequence[int], lang: str
) -> list[DocScore]:
    model, context = extractor
    ranked = rank_candidates(context.featurize(document), model)
    return [score([kp.phrase for kp in select_top(ranked, k)], gold, k, lang) for k in ks]


def evaluate_at(
    stories: Sequence[tuple[Document, GoldSet]],
    extractor: Extractor,
    cr: float,
    config: CentralityConfig,
    ks: Sequence[int],
    stopwords: frozenset[str] = frozenset(),
    lang: str = "en",
    jobs: int = 1,
    rankings: Optional[Sequence[CentralityRanking]] = None,
) -> tuple[list[EvalReport], LossSummary]:
    """Filter every story at `cr`, extract and score at each k.

    At cr=0 stories are not filtered and ssc/metric are reported as "-".
    """
    ks = sorted(set(ks))
    ssc, metric = (
        (BASELINE_LABEL, BASELINE_LABEL) if cr == 0 else (config.ssc.label, config.metric.label)
    )

    def evaluate_story(i: int) -> tuple[list[DocScore], LossReport]:
        document, gold = stories[i]
        filtered = document
        if cr != 0:
            ranking = rankings[i] if rankings is not None else None
            filtered = light_filter(document, cr, config, stopwords, ranking).document
        return (
            _doc_scores(filtered, gold, extractor, ks, lang),
            keyphrase_loss(document, filtered, gold),
        )

    results = ordered_map(evaluate_story, range(len(stories)), jobs)
    reports = [
        EvalReport(
            k=k, cr=cr, ssc=ssc, metric=metric, docs=tuple(scores[i] for scores, _ in results)
        )
        for i, k in enumerate(ks)
    ]
    loss = LossSummary(cr=cr, ssc=ssc, metric=metric, docs=tuple(loss for _, loss in results))
    return reports, loss


def run_sweep(
    stories: Sequence[tuple[Document, GoldSet]],
    crs: Sequence[float],
    configs: Sequence[CentralityConfig],
    ks: Sequence[int],
    models: Mapping[float, Extractor],
    stopwords: frozenset[str] = frozenset(),
    lang: str = "en",
    jobs: int = 1,
    provenance: Optional[dict[str, Any]] = None,
) -> SweepResult:
    """Evaluate every (cr, config, k) cell over the test stories.

    The cr=0 baseline is always evaluated first and yields one row per k.
    Sentence rankings are computed once per (story, config) and shared by
    every cr, so kept sentence sets are nested as cr grows.

    Raises:
        MissingModelError: If `models` has no entry for one of the crs
    """
    crs = [0.0] + sorted({float(cr) for cr in crs if cr != 0})
    missing = [cr for cr in crs if cr not in models]
    if missing:
        raise MissingModelError(f"No model trained at cr={', '.join(f'{cr:g}' for cr in missing)}")
    if not configs:
        raise ConfigurationError("At least one filter configuration is required")

    reports, loss = evaluate_at(stories, models[0.0], 0.0, configs[0], ks, stopwords, lang, jobs)
    all_reports = list(reports)
    losses = [loss]

    for config in configs:
        rankings = ordered_map(
            lambda story: rank_document(story[0], config, stopwords), stories, jobs
        )
        for cr in crs[1:]:
            logger.info(f"Evaluating cr={cr:g} with {config.label}")
            reports, loss = evaluate_at(
                stories, models[cr], cr, config, ks, stopwords, lang, jobs, rankings
            )
            all_reports.extend(reports)
            losses.append(loss)

    return SweepResult(reports=tuple(all_reports), losses=tuple(losses), config=provenance or {})
