"""4-gram domain language model over stems, scored with stupid backoff."""

import logging
import math
from collections import Counter
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .exceptions import CorpusIOError, DataError
from .textcore import TextAnalyzer

logger = logging.getLogger(__name__)

BOS = "<s>"
LM_ORDER = 4
DEFAULT_BACKOFF = 0.4
FORMAT_HEADER = "#lightake-lm v1"

NGram = tuple[str, ...]


class DomainLM:
    """Stem n-gram counts (n = 1..order) with begin-of-sentence padding.

    Only n-grams ending in a real word are stored; contexts made entirely of
    padding symbols have the sentence count as their count.
    """

    def __init__(
        self,
        counts: Mapping[NGram, int],
        sentence_count: int,
        order: int = LM_ORDER,
        backoff_factor: float = DEFAULT_BACKOFF,
    ):
        if not 0.0 < backoff_factor <= 1.0:
            raise DataError(f"Backoff factor must be in (0, 1], got {backoff_factor}")
        self.order = order
        self.backoff_factor = backoff_factor
        self.sentence_count = sentence_count
        self._counts = dict(counts)
        self._validate()
        self.vocab_size = sum(1 for gram in self._counts if len(gram) == 1)
        self.total_tokens = sum(c for gram, c in self._counts.items() if len(gram) == 1)

    def _validate(self) -> None:
        if not any(len(gram) == 1 for gram in self._counts):
            raise DataError("Language model has an empty vocabulary")
        for gram, count in self._counts.items():
            if count < 1 or not 1 <= len(gram) <= self.order:
                raise DataError(f"Invalid n-gram entry {gram!r}: {count}")
            if len(gram) > 1 and not self._is_padding(gram[:-1]) and gram[:-1] not in self._counts:
                raise DataError(f"N-gram {gram!r} has no counted prefix")

    @staticmethod
    def _is_padding(context: NGram) -> bool:
        return all(word == BOS for word in context)

    @classmethod
    def train(
        cls,
        sentences: Iterable[Sequence[str]],
        order: int = LM_ORDER,
        backoff_factor: float = DEFAULT_BACKOFF,
    ) -> "DomainLM":
        """Count every n-gram (n = 1..order) ending in a word of each sentence."""
        counts: Counter[NGram] = Counter()
        sentence_count = 0
        pad = [BOS] * (order - 1)
        for sentence in sentences:
            if not sentence:
                continue
            sentence_count += 1
            padded = pad + list(sentence)
            for i in range(len(sentence)):
                end = order - 1 + i + 1
                for n in range(1, order + 1):
                    counts[tuple(padded[end - n:end])] += 1
        return cls(counts, sentence_count, order, backoff_factor)

    def count(self, gram: NGram) -> int:
        if not gram:
            return self.total_tokens
        if self._is_padding(gram):
            return self.sentence_count
        return self._counts.get(gram, 0)

    def score(self, context: NGram, word: str) -> float:
        """Stupid-backoff score s(word | context)."""
        context = context[-(self.order - 1):] if self.order > 1 else ()
        penalty = 1.0
        while True:
            seen = self.count(context + (word,))
            if seen:
                return penalty * seen / self.count(context)
            if not context:
                return penalty * self.backoff_factor / self.vocab_size
            penalty *= self.backoff_factor
            context = context[1:]

    def logprob(self, words: Sequence[str]) -> float:
        """Length-normalized natural-log score of a word sequence."""
        if not words:
            return 0.0
        total = 0.0
        for i, word in enumerate(words):
            total += math.log(self.score(tuple(words[max(0, i - self.order + 1):i]), word))
        return total / len(words)

    def items(self) -> list[tuple[NGram, int]]:
        return sorted(self._counts.items(), key=lambda item: (len(item[0]), item[0]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DomainLM):
            return NotImplemented
        return (
            self.order == other.order
            and self.backoff_factor == other.backoff_factor
            and self.sentence_count == other.sentence_count
            and self._counts == other._counts
        )

    def save(self, path: Path) -> None:
        """Write the line-based count dump."""
        lines = [
            FORMAT_HEADER,
            f"order\t{self.order}",
            f"backoff\t{self.backoff_factor!r}",
            f"sentences\t{self.sentence_count}",
        ]
        lines.extend(f"{count}\t{' '.join(gram)}" for gram, count in self.items())
        try:
            Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            raise CorpusIOError(f"Cannot write language model {path}: {e}") from e
        logger.info(f"Language model written to {path} ({len(self._counts)} n-grams)")

    @classmethod
    def load(cls, path: Path) -> "DomainLM":
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except (OSError, UnicodeDecodeError) as e:
            raise CorpusIOError(f"Cannot read language model {path}: {e}") from e
        if not lines or lines[0] != FORMAT_HEADER:
            raise DataError(f"{path} is not a lightake language model")
        try:
            header = dict(line.split("\t", 1) for line in lines[1:4])
            counts = {}
            for line in lines[4:]:
                count, gram = line.split("\t", 1)
                counts[tuple(gram.split(" "))] = int(count)
            return cls(
                counts,
                sentence_count=int(header["sentences"]),
                order=int(header["order"]),
                backoff_factor=float(header["backoff"]),
            )
        except (KeyError, ValueError) as e:
            raise DataError(f"Malformed language model {path}: {e}") from e


def lm_train(
    corpus_paths: Sequence[Path],
    analyzer: TextAnalyzer,
    order: int = LM_ORDER,
    backoff_factor: float = DEFAULT_BACKOFF,
) -> DomainLM:
    """Train a domain model from raw text files.

    Raises:
        CorpusIOError: If a file cannot be read
        DataError: If a file contains no words or no files are given
    """
    if not corpus_paths:
        raise DataError("No language model corpus files given")

    sentences: list[list[str]] = []
    for path in corpus_paths:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise CorpusIOError(f"Cannot read language model corpus {path}: {e}") from e
        try:
            document = analyzer.analyze(Path(path).stem, text, str(path))
        except DataError as e:
            raise DataError(f"Language model corpus file {path} is empty") from e
        sentences.extend(sentence.stems for sentence in document.sentences)

    logger.info(f"Training {order}-gram model on {len(sentences)} sentences")
    return DomainLM.train(sentences, order, backoff_factor)
