"""Candidate phrase generation and feature extraction for keyphrase classification."""

import logging
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import CorpusIOError, DataError
from .langmodel import DomainLM
from .textcore import Document, IdfTable, bundled_resource, is_stopword, stem

logger = logging.getLogger(__name__)

MAX_PHRASE_LEN = 3
POS_TAGS = frozenset({"NOUN", "VERB", "ADJ", "ADV", "OTHER"})
UNKNOWN_TAG = "OTHER"
BUNDLED_POS = {"en": "pos_en.tsv"}

# Bumped whenever the feature set or its order changes; stored in model files.
FEATURE_SCHEMA = "lightake-features/v1"
FEATURE_NAMES = (
    "tfidf",
    "first_occurrence",
    "n_words",
    "n_chars",
    "n_named_entities",
    "n_capital_letters",
    "n_pos_tags",
    "lm_logprob",
)


class CandidatePhrase(BaseModel):
    """A candidate keyphrase aggregated over all of its occurrences in a document."""

    model_config = ConfigDict(frozen=True)

    surface_form: str
    normalized: str
    n_words: int = Field(ge=1)
    occurrences: tuple[tuple[int, int], ...]
    surfaces: tuple[str, ...]
    first_occurrence_pos: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_occurrences(self) -> "CandidatePhrase":
        if not self.occurrences:
            raise ValueError(f"candidate {self.normalized!r} has no occurrences")
        if len(self.surfaces) != len(self.occurrences):
            raise ValueError("one surface string is required per occurrence")
        if len(self.normalized.split()) != self.n_words:
            raise ValueError(f"{self.normalized!r} does not have {self.n_words} words")
        return self


class FeatureVector(BaseModel):
    model_config = ConfigDict(frozen=True)

    tfidf: float = Field(ge=0.0)
    first_occurrence: float = Field(ge=0.0, le=1.0)
    n_words: int = Field(ge=1)
    n_chars: int = Field(ge=1)
    n_named_entities: int = Field(ge=0)
    n_capital_letters: int = Field(ge=0)
    n_pos_tags: int = Field(ge=0)
    lm_logprob: float = Field(le=0.0)

    @model_validator(mode="after")
    def _check_values(self) -> "FeatureVector":
        if not all(math.isfinite(value) for value in self.as_tuple()):
            raise ValueError("feature values must be finite")
        if self.n_chars < self.n_words:
            raise ValueError("n_chars must be at least n_words")
        return self

    def as_tuple(self) -> tuple[float, ...]:
        """Feature values in FEATURE_NAMES order."""
        return tuple(float(getattr(self, name)) for name in FEATURE_NAMES)


class PosLexicon:
    """Stem → coarse POS tag sets; unknown stems are tagged OTHER."""

    def __init__(self, tags: Optional[Mapping[str, frozenset[str]]] = None):
        self._tags = dict(tags or {})
        for key, value in self._tags.items():
            if not value:
                raise DataError(f"POS lexicon entry {key!r} has no tags")

    @classmethod
    def parse(cls, text: str, lang: str = "en", source: str = "<string>") -> "PosLexicon":
        """Parse `word<TAB>TAG[,TAG...]` lines; keys are stemmed on load."""
        tags: dict[str, set[str]] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            word, sep, tag_list = line.partition("\t")
            entry = {tag.strip().upper() for tag in tag_list.split(",") if tag.strip()}
            if not sep or not entry:
                raise DataError(f"{source}:{lineno}: expected 'stem<TAB>TAG[,TAG...]'")
            unknown = entry - POS_TAGS
            if unknown:
                raise DataError(f"{source}:{lineno}: unknown POS tags {sorted(unknown)}")
            tags.setdefault(stem(word.strip(), lang), set()).update(entry)
        return cls({key: frozenset(value) for key, value in tags.items()})

    @classmethod
    def load(cls, path: Path, lang: str = "en") -> "PosLexicon":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise CorpusIOError(f"Cannot read POS lexicon {path}: {e}") from e
        return cls.parse(text, lang, str(path))

    @classmethod
    def bundled(cls, lang: str = "en") -> "PosLexicon":
        return _bundled_lexicon(lang)

    def tags_for(self, stem_: str) -> frozenset[str]:
        return self._tags.get(stem_, frozenset({UNKNOWN_TAG}))

    def __len__(self) -> int:
        return len(self._tags)


@lru_cache(maxsize=None)
def _bundled_lexicon(lang: str) -> PosLexicon:
    name = BUNDLED_POS.get(lang)
    if name is None:
        logger.warning(f"No bundled POS lexicon for {lang!r}; every word is tagged {UNKNOWN_TAG}")
        return PosLexicon()
    return PosLexicon.parse(bundled_resource(name), lang, name)


def _is_digits(surface: str) -> bool:
    return surface.isdigit()


def generate_candidates(
    doc: Document, stopwords: frozenset[str], max_phrase_len: int = MAX_PHRASE_LEN
) -> list[CandidatePhrase]:
    """Enumerate within-sentence word n-grams and aggregate them by normalized form.

    A candidate never starts or ends with a stopword and contains no
    digit-only token. Candidates are returned in order of first occurrence.
    """
    total = doc.n_tokens
    occurrences: dict[str, list[tuple[int, int]]] = {}
    surfaces: dict[str, list[str]] = {}
    first_pos: dict[str, int] = {}

    base = 0
    for sentence in doc.sentences:
        tokens = sentence.tokens
        stop = [is_stopword(token, stopwords) for token in tokens]
        for start in range(len(tokens)):
            if stop[start] or _is_digits(tokens[start].surface):
                continue
            for end in range(start + 1, min(start + max_phrase_len, len(tokens)) + 1):
                if _is_digits(tokens[end - 1].surface):
                    break
                if stop[end - 1]:
                    continue
                span = tokens[start:end]
                key = " ".join(token.stem for token in span)
                if key not in occurrences:
                    occurrences[key] = []
                    surfaces[key] = []
                    first_pos[key] = base + start
                occurrences[key].append((sentence.index, start))
                surfaces[key].append(" ".join(token.surface for token in span))
        base += len(tokens)

    candidates = []
    for key in sorted(occurrences, key=lambda k: (first_pos[k], len(k))):
        forms = Counter(surfaces[key])
        candidates.append(
            CandidatePhrase(
                surface_form=max(forms, key=lambda form: forms[form]),
                normalized=key,
                n_words=len(key.split()),
                occurrences=tuple(occurrences[key]),
                surfaces=tuple(surfaces[key]),
                first_occurrence_pos=first_pos[key] / total,
            )
        )
    return candidates


def capitalized_mid_sentence(doc: Document) -> frozenset[str]:
    """Surfaces that appear capitalized somewhere other than sentence start."""
    return frozenset(
        token.surface
        for token in doc.iter_tokens()
        if token.is_capitalized and not token.is_sentence_initial
    )


def count_named_entities(
    c: CandidatePhrase, doc: Document, mid_capitalized: Optional[frozenset[str]] = None
) -> int:
    """Count maximal runs of name-like capitalized tokens in the first occurrence."""
    if mid_capitalized is None:
        mid_capitalized = capitalized_mid_sentence(doc)
    sentence_index, token_index = c.occurrences[0]
    tokens = doc.sentences[sentence_index].tokens[token_index:token_index + c.n_words]

    runs = 0
    inside = False
    for token in tokens:
        name_like = token.is_capitalized and (
            not token.is_sentence_initial or token.surface in mid_capitalized
        )
        if name_like and not inside:
            runs += 1
        inside = name_like
    return runs


def lm_logprob(lm: DomainLM, phrase: CandidatePhrase) -> float:
    return lm.logprob(phrase.normalized.split())


def extract_features(
    c: CandidatePhrase,
    doc: Document,
    idf: IdfTable,
    lm: DomainLM,
    pos: PosLexicon,
    mid_capitalized: Optional[frozenset[str]] = None,
) -> FeatureVector:
    """Compute the classifier features of one candidate.

    Multiword TF×IDF is phrase frequency times the mean IDF of the phrase's stems.
    """
    stems = c.normalized.split()
    mean_idf = math.fsum(idf.get(s) for s in stems) / len(stems)
    tags: set[str] = set()
    for s in stems:
        tags |= pos.tags_for(s)

    return FeatureVector(
        tfidf=len(c.occurrences) / doc.n_tokens * mean_idf,
        first_occurrence=c.first_occurrence_pos,
        n_words=c.n_words,
        n_chars=sum(1 for ch in c.surface_form if not ch.isspace()),
        n_named_entities=count_named_entities(c, doc, mid_capitalized),
        n_capital_letters=sum(1 for surface in c.surfaces for ch in surface if ch.isupper()),
        n_pos_tags=len(tags),
        lm_logprob=lm_logprob(lm, c),
    )


@dataclass(frozen=True)
class ExtractionContext:
    """Corpus-level resources shared by every document's feature extraction."""

    idf: IdfTable
    lm: DomainLM
    pos: PosLexicon
    stopwords: frozenset[str]
    max_phrase_len: int = MAX_PHRASE_LEN

    def featurize(self, doc: Document) -> list[tuple[CandidatePhrase, FeatureVector]]:
        mid_capitalized = capitalized_mid_sentence(doc)
        return [
            (c, extract_features(c, doc, self.idf, self.lm, self.pos, mid_capitalized))
            for c in generate_candidates(doc, self.stopwords, self.max_phrase_len)
        ]
