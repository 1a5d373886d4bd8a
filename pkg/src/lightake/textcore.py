"""Deterministic text normalization shared by the summarizer and keyphrase extraction.

Sentence segmentation, tokenization, stemming, stopwords, per-sentence term
vectors and IDF statistics. All models are frozen after construction.
"""

import logging
import math
import re
from collections import Counter
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Iterable,
    Iterator,
    Literal,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
)

import numpy as np
from nltk.stem.snowball import SnowballStemmer
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import CorpusIOError, DataError

if TYPE_CHECKING:
    from .config import PipelineConfig

logger = logging.getLogger(__name__)

SNOWBALL_LANGUAGES = {"en": "english", "pt": "portuguese"}
BUNDLED_STOPWORDS = {"en": "stopwords_en.txt", "pt": "stopwords_pt.txt"}
BUNDLED_ABBREVIATIONS = "abbreviations.txt"

IdfUnit = Literal["document", "sentence"]

# Snowball is not idempotent on every input; stemming iterates to a fixpoint.
_MAX_STEM_PASSES = 8

_BOUNDARY = re.compile(r"[.?!]+(?=\s)")
_TOKEN = re.compile(r"(?:[^\W\d_]\.){2,}|\w+(?:['’\-]\w+)*")
_LINE = re.compile(r"[^\n]+")

_warned_languages: set[str] = set()


def parse_word_list(text: str) -> frozenset[str]:
    """Parse the one-entry-per-line format; `#` starts a comment."""
    words = set()
    for line in text.splitlines():
        entry = line.split("#", 1)[0].strip().lower()
        if entry:
            words.add(entry)
    return frozenset(words)


def load_word_list(path: Path) -> frozenset[str]:
    """Load a stopword or abbreviation file."""
    try:
        return parse_word_list(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusIOError(f"Cannot read word list {path}: {e}") from e


def bundled_resource(name: str) -> str:
    """Read a data file shipped inside the package."""
    return (resources.files("lightake") / "data" / name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def default_stopwords(lang: str = "en") -> frozenset[str]:
    name = BUNDLED_STOPWORDS.get(lang)
    if name is None:
        logger.warning(f"No bundled stopword list for language {lang!r}; using none")
        return frozenset()
    return parse_word_list(bundled_resource(name))


@lru_cache(maxsize=None)
def default_abbreviations() -> frozenset[str]:
    return parse_word_list(bundled_resource(BUNDLED_ABBREVIATIONS))


@lru_cache(maxsize=None)
def _snowball(lang: str) -> Optional[SnowballStemmer]:
    name = SNOWBALL_LANGUAGES.get(lang)
    return SnowballStemmer(name) if name else None


@lru_cache(maxsize=1 << 16)
def stem(word: str, lang: str = "en") -> str:
    """Lowercase and suffix-strip `word` with the Snowball stemmer for `lang`.

    The stemmer is re-applied until the output stops changing, which makes
    stem(stem(w)) == stem(w). Unknown languages fall back to lowercasing and
    warn once.
    """
    lowered = word.lower()
    stemmer = _snowball(lang)
    if stemmer is None:
        if lang not in _warned_languages:
            _warned_languages.add(lang)
            logger.warning(f"No stemmer for language {lang!r}; falling back to lowercase")
        return lowered

    current = lowered
    for _ in range(_MAX_STEM_PASSES):
        stripped = stemmer.stem(current)
        if not stripped or stripped == current:
            break
        current = stripped
    return current


class Token(BaseModel):
    """A word occurrence with its stem and casing flags."""

    model_config = ConfigDict(frozen=True)

    surface: str
    stem: str
    is_capitalized: bool
    is_sentence_initial: bool
    char_offset: int = Field(ge=0)


class Sentence(BaseModel):
    """A passage of a document."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=0)
    text: str
    tokens: tuple[Token, ...]

    @model_validator(mode="after")
    def _check_tokens(self) -> "Sentence":
        offsets = [token.char_offset for token in self.tokens]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError("token offsets must be strictly increasing")
        if any(token.is_sentence_initial for token in self.tokens[1:]):
            raise ValueError("only the first token may be sentence-initial")
        return self

    @property
    def stems(self) -> list[str]:
        return [token.stem for token in self.tokens]


class Document(BaseModel):
    """A news story: ordered sentences of tokens."""

    model_config = ConfigDict(frozen=True)

    id: str
    sentences: tuple[Sentence, ...]
    source_path: str = ""

    @model_validator(mode="after")
    def _check_sentences(self) -> "Document":
        if not self.sentences:
            raise ValueError(f"document {self.id!r} has no sentences")
        for position, sentence in enumerate(self.sentences):
            if sentence.index != position:
                raise ValueError(
                    f"document {self.id!r}: sentence {position} carries index {sentence.index}"
                )
        return self

    @property
    def n_tokens(self) -> int:
        return sum(len(sentence.tokens) for sentence in self.sentences)

    def iter_tokens(self) -> Iterator[Token]:
        for sentence in self.sentences:
            yield from sentence.tokens

    def text(self) -> str:
        """One sentence per line."""
        return "\n".join(sentence.text for sentence in self.sentences)


class TermVector(BaseModel):
    """Sparse stem → weight vector with a cached Euclidean norm."""

    model_config = ConfigDict(frozen=True)

    weights: dict[str, float]
    norm_l2: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _check_weights(self) -> "TermVector":
        if any(not weight > 0.0 for weight in self.weights.values()):
            raise ValueError("term vector weights must be positive")
        expected = _l2(self.weights.values())
        if abs(expected - self.norm_l2) > 1e-9:
            raise ValueError(f"cached norm {self.norm_l2} differs from {expected}")
        return self

    @classmethod
    def from_weights(cls, weights: Mapping[str, float]) -> "TermVector":
        kept = {term: float(weight) for term, weight in sorted(weights.items()) if weight != 0}
        return cls(weights=kept, norm_l2=_l2(kept.values()))

    def scaled(self, factor: float) -> "TermVector":
        return TermVector.from_weights({term: w * factor for term, w in self.weights.items()})

    def __len__(self) -> int:
        return len(self.weights)


def _l2(values: Iterable[float]) -> float:
    array = np.fromiter(values, dtype=np.float64)
    return float(np.sqrt(np.dot(array, array))) if array.size else 0.0


class IdfTable(BaseModel):
    """Smoothed inverse document frequencies: log((N+1)/(df+1)) + 1."""

    model_config = ConfigDict(frozen=True)

    idf: dict[str, float]
    doc_count: int = Field(ge=1)
    unit: IdfUnit = "document"

    @model_validator(mode="after")
    def _check_idf(self) -> "IdfTable":
        if any(not value > 0.0 for value in self.idf.values()):
            raise ValueError("idf values must be positive")
        return self

    @property
    def unseen_idf(self) -> float:
        return math.log(self.doc_count + 1) + 1.0

    def get(self, term: str) -> float:
        return self.idf.get(term, self.unseen_idf)


def smoothed_idf(doc_count: int, df: int) -> float:
    return math.log((doc_count + 1) / (df + 1)) + 1.0


def build_idf(corpus: Sequence[Document], unit: IdfUnit = "document") -> IdfTable:
    """Count the units (documents or sentences) that contain each stem.

    Args:
        corpus: Non-empty list of documents
        unit: "sentence" for passage-level statistics within a document,
            "document" for corpus-level statistics

    Returns:
        IdfTable covering every stem in the corpus
    """
    if not corpus:
        raise DataError("Cannot build IDF statistics from an empty corpus")

    if unit == "document":
        units: list[set[str]] = [
            {token.stem for token in document.iter_tokens()} for document in corpus
        ]
    else:
        units = [set(sentence.stems) for document in corpus for sentence in document.sentences]

    df: Counter[str] = Counter()
    for stems in units:
        df.update(stems)
    n_units = len(units)
    return IdfTable(
        idf={term: smoothed_idf(n_units, df[term]) for term in sorted(df)},
        doc_count=n_units,
        unit=unit,
    )


def is_stopword(token: Token, stopwords: frozenset[str]) -> bool:
    return token.surface.lower() in stopwords


def vectorize(sentence: Sentence, idf: IdfTable, stopwords: frozenset[str]) -> TermVector:
    """TF×IDF bag-of-stems vector of a sentence, stopwords excluded."""
    tf = Counter(token.stem for token in sentence.tokens if not is_stopword(token, stopwords))
    return TermVector.from_weights({term: count * idf.get(term) for term, count in tf.items()})


class SentenceSpan(NamedTuple):
    start: int
    end: int
    text: str


def _is_initial(word: str) -> bool:
    return len(word) == 2 and word[0].isupper() and word[1] == "."


def _protected(words: Sequence[str], abbreviations: frozenset[str]) -> bool:
    """True when the period ending the last of `words` does not end the sentence.

    That is the case for known abbreviations and for initials in a name: an
    initial opening the sentence, following another initial, or following a
    capitalized word that does not open the sentence ("John F. Kennedy", but
    not "plan B.").
    """
    last = words[-1]
    if last.lower() in abbreviations:
        return True
    if not _is_initial(last):
        return False
    if len(words) == 1:
        return True
    previous = words[-2]
    if _is_initial(previous):
        return True
    return previous[0].isupper() and len(words) > 2


def segment_sentences(
    raw: str, abbreviations: Optional[frozenset[str]] = None
) -> list[SentenceSpan]:
    """Split raw text into sentence spans.

    Splits on newlines and on `.?!` followed by whitespace and a capital
    letter, unless the terminated word is a known abbreviation or an
    initial inside a name. Whitespace-only input gives an empty list.
    """
    if abbreviations is None:
        abbreviations = default_abbreviations()

    spans: list[SentenceSpan] = []

    def emit(start: int, end: int) -> None:
        piece = raw[start:end]
        stripped = piece.strip()
        if stripped:
            lead = len(piece) - len(piece.lstrip())
            spans.append(SentenceSpan(start + lead, start + lead + len(stripped), stripped))

    for line in _LINE.finditer(raw):
        base, text = line.start(), line.group()
        start = 0
        for boundary in _BOUNDARY.finditer(text):
            following = text[boundary.end():].lstrip()
            if not following or not following[0].isupper():
                continue
            words = text[start:boundary.end()].split()
            if words and _protected(words, abbreviations):
                continue
            emit(base + start, base + boundary.end())
            start = boundary.end()
        emit(base + start, base + len(text))
    return spans


def tokenize(sentence_text: str, lang: str = "en", offset: int = 0) -> list[Token]:
    """Split a sentence into word tokens.

    Punctuation-only tokens are dropped, digits are kept and internal periods
    of abbreviation-shaped tokens ("U.S.") are preserved. `offset` is added to
    every char_offset so tokens can point into the enclosing document.
    """
    tokens: list[Token] = []
    for match in _TOKEN.finditer(sentence_text):
        surface = match.group()
        if not any(ch.isalnum() for ch in surface):
            continue
        tokens.append(
            Token(
                surface=surface,
                stem=stem(surface, lang),
                is_capitalized=surface[0].isupper(),
                is_sentence_initial=not tokens,
                char_offset=offset + match.start(),
            )
        )
    return tokens


def normalize_phrase(text: str, lang: str = "en") -> str:
    """Lowercased, stemmed, single-spaced form used for keyphrase matching."""
    return " ".join(token.stem for token in tokenize(text, lang))


class TextAnalyzer:
    """Turns raw story text into Documents for one language."""

    def __init__(
        self,
        language: str = "en",
        stopwords: Optional[frozenset[str]] = None,
        abbreviations: Optional[frozenset[str]] = None,
    ):
        self.language = language
        self.stopwords = default_stopwords(language) if stopwords is None else stopwords
        self.abbreviations = (
            default_abbreviations() if abbreviations is None else abbreviations
        )

    @classmethod
    def from_config(cls, config: "PipelineConfig") -> "TextAnalyzer":
        """Build an analyzer from a PipelineConfig."""
        stopwords = load_word_list(config.stopwords_path) if config.stopwords_path else None
        abbreviations = (
            load_word_list(config.abbreviations_path) if config.abbreviations_path else None
        )
        return cls(config.language, stopwords, abbreviations)

    def analyze(self, doc_id: str, raw: str, source_path: str = "") -> Document:
        """Segment and tokenize a story.

        Raises:
            DataError: If the text contains no word tokens
        """
        sentences: list[Sentence] = []
        for span in segment_sentences(raw, self.abbreviations):
            tokens = tokenize(span.text, self.language, offset=span.start)
            if tokens:
                sentences.append(
                    Sentence(index=len(sentences), text=span.text, tokens=tuple(tokens))
                )
        if not sentences:
            raise DataError(f"Story {doc_id!r} contains no words")
        return Document(id=doc_id, sentences=tuple(sentences), source_path=source_path)

    def normalize(self, phrase: str) -> str:
        return normalize_phrase(phrase, self.language)

    def is_stopword(self, token: Token) -> bool:
        return is_stopword(token, self.stopwords)
