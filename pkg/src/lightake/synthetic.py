"""Synthetic news corpus with planted keyphrases in central sentences.

Each story is a set of topic sentences written in pairs that share vocabulary
(so each is the other's nearest neighbour), plus two off-topic noise
sentences built from words and names used nowhere else in the story. Gold
keyphrases are two-word capitalized names, one per topic sentence; noise
sentences carry names too, so they compete for the top ranks unless they are
filtered away.
"""

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from .corpus import CorpusLayout
from .exceptions import CorpusIOError
from .textcore import default_abbreviations, default_stopwords, stem

logger = logging.getLogger(__name__)

SYLLABLES = (
    "ka", "lo", "mi", "ten", "ra", "vu", "sel", "dor", "pi", "na", "gor", "bel",
    "tu", "sha", "mar", "wen", "fa", "ri", "zol", "qua", "ne", "bo", "li", "dex",
)  # fmt: skip
STARTERS = ("The", "In", "For", "By", "With")
LINKS = ("the", "in", "for", "to", "with")
STORY_LENGTHS = (12, 14, 16, 18, 20)
NOISE_SENTENCES = 2
GOLD_PER_STORY = 8
NOISE_NAMES_PER_SENTENCE = 2
NOISE_WORDS_PER_SENTENCE = 8
PAIR_WORDS = 4
STORY_TOPIC_WORDS = 6
PAIR_TOPIC_WORDS = 3
NAME_POOL_SIZE = 40


class WordPool:
    """Draws pseudo-words whose stems are unique across the whole corpus."""

    def __init__(self, rng: np.random.Generator, lang: str = "en"):
        self.rng = rng
        self.lang = lang
        self._stopwords = default_stopwords(lang)
        self._abbreviations = default_abbreviations()
        self._stems: set[str] = set()

    def take(self) -> str:
        while True:
            n_syllables = int(self.rng.integers(2, 4))
            word = "".join(SYLLABLES[i] for i in self.rng.integers(0, len(SYLLABLES), n_syllables))
            word_stem = stem(word, self.lang)
            if (
                word_stem in self._stems
                or word in self._stopwords
                or f"{word}." in self._abbreviations
            ):
                continue
            self._stems.add(word_stem)
            return word

    def take_many(self, n: int) -> list[str]:
        return [self.take() for _ in range(n)]

    def take_name(self) -> str:
        return " ".join(word.capitalize() for word in self.take_many(2))


def _sentence(rng: np.random.Generator, words: list[str], names: list[str]) -> str:
    """Starter stopword, content words joined by link stopwords, names as `of NAME and`."""
    parts = [[word] for word in rng.permutation(words).tolist()]
    for name in names:
        position = int(rng.integers(0, len(parts) + 1))
        parts.insert(position, ["of", name, "and"])

    tokens = [STARTERS[int(rng.integers(0, len(STARTERS)))]]
    for i, part in enumerate(parts):
        if i and i % 2 == 0 and part[0] != "of":
            tokens.append(LINKS[int(rng.integers(0, len(LINKS)))])
        tokens.extend(part)
    return " ".join(tokens) + "."


def generate_story(
    rng: np.random.Generator, pool: WordPool, names: list[str]
) -> tuple[str, list[str]]:
    """One story's text and its gold keyphrases."""
    n_sentences = int(rng.choice(STORY_LENGTHS))
    n_topic = n_sentences - NOISE_SENTENCES
    n_noise_names = NOISE_SENTENCES * NOISE_NAMES_PER_SENTENCE
    chosen = rng.choice(len(names), GOLD_PER_STORY + n_noise_names, replace=False)
    gold = [names[i] for i in chosen[:GOLD_PER_STORY]]
    noise_names = [names[i] for i in chosen[GOLD_PER_STORY:]]

    topic_words = pool.take_many(STORY_TOPIC_WORDS)
    named = set(rng.choice(n_topic, GOLD_PER_STORY, replace=False).tolist())
    gold_iter = iter(gold)

    sentences = []
    for pair in range(n_topic // 2):
        words = pool.take_many(PAIR_WORDS) + [
            topic_words[i] for i in rng.choice(STORY_TOPIC_WORDS, PAIR_TOPIC_WORDS, replace=False)
        ]
        for member in (2 * pair, 2 * pair + 1):
            planted = [next(gold_iter)] if member in named else []
            sentences.append(_sentence(rng, words, planted))

    for i in range(NOISE_SENTENCES):
        sentences.append(
            _sentence(
                rng,
                pool.take_many(NOISE_WORDS_PER_SENTENCE),
                noise_names[i * NOISE_NAMES_PER_SENTENCE:(i + 1) * NOISE_NAMES_PER_SENTENCE],
            )
        )

    order = rng.permutation(len(sentences)).tolist()
    return " ".join(sentences[i] for i in order), gold


def _write_split(out_dir: Path, stories: list[tuple[str, list[str]]], offset: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, (text, gold) in enumerate(stories, start=offset):
        doc_id = f"story-{i:04d}"
        (out_dir / f"{doc_id}.txt").write_text(text + "\n", encoding="utf-8")
        (out_dir / f"{doc_id}.key").write_text("\n".join(gold) + "\n", encoding="utf-8")


def generate_corpus(
    out_dir: Path,
    n_train: int = 50,
    n_test: int = 10,
    seed: int = 7,
    lang: str = "en",
    pool: Optional[WordPool] = None,
) -> tuple[CorpusLayout, CorpusLayout]:
    """Write `train/` and `test/` story directories under `out_dir`.

    The same seed always produces the same files.
    """
    rng = np.random.default_rng(seed)
    pool = pool or WordPool(rng, lang)
    names = [pool.take_name() for _ in range(NAME_POOL_SIZE)]
    stories = [generate_story(rng, pool, names) for _ in range(n_train + n_test)]

    out_dir = Path(out_dir)
    try:
        _write_split(out_dir / "train", stories[:n_train], 1)
        _write_split(out_dir / "test", stories[n_train:], n_train + 1)
    except OSError as e:
        raise CorpusIOError(f"Cannot write synthetic corpus to {out_dir}: {e}") from e

    logger.info(f"Wrote {n_train} training and {n_test} test stories to {out_dir}")
    return CorpusLayout.split(out_dir)
