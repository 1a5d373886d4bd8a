"""Story corpus discovery: `<id>.txt` stories with optional `<id>.key` gold files."""

import logging
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict

from .evaluation import GoldSet
from .exceptions import CorpusIOError, DataError, EmptyCorpusError, MissingGoldError
from .textcore import Document, TextAnalyzer

logger = logging.getLogger(__name__)

TEXT_SUFFIX = ".txt"
GOLD_SUFFIX = ".key"


class Story(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str
    text_path: Path
    key_path: Optional[Path] = None

    @property
    def has_gold(self) -> bool:
        return self.key_path is not None


def read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusIOError(f"Cannot read {path}: {e}") from e


class CorpusLayout(BaseModel):
    """Stories of one directory, sorted by id."""

    model_config = ConfigDict(frozen=True)

    root: Path
    stories: tuple[Story, ...]

    @classmethod
    def discover(cls, root: Path) -> "CorpusLayout":
        """Scan `root` for stories.

        Raises:
            CorpusIOError: If `root` is not a readable directory
            EmptyCorpusError: If it holds no `.txt` stories
            DataError: If a `.key` file has no matching `.txt`
        """
        root = Path(root)
        if not root.is_dir():
            raise CorpusIOError(f"Corpus directory {root} does not exist")
        try:
            entries = sorted(path for path in root.iterdir() if path.is_file())
        except OSError as e:
            raise CorpusIOError(f"Cannot list corpus directory {root}: {e}") from e

        texts = {path.stem: path for path in entries if path.suffix == TEXT_SUFFIX}
        keys = {path.stem: path for path in entries if path.suffix == GOLD_SUFFIX}
        orphans = sorted(set(keys) - set(texts))
        if orphans:
            raise DataError(f"Gold files without stories in {root}: {', '.join(orphans)}")
        if not texts:
            raise EmptyCorpusError(f"No {TEXT_SUFFIX} stories found in {root}")

        stories = tuple(
            Story(doc_id=doc_id, text_path=texts[doc_id], key_path=keys.get(doc_id))
            for doc_id in sorted(texts)
        )
        logger.info(
            f"Found {len(stories)} stories in {root} "
            f"({sum(story.has_gold for story in stories)} with gold)"
        )
        return cls(root=root, stories=stories)

    @classmethod
    def split(cls, root: Path) -> tuple["CorpusLayout", "CorpusLayout"]:
        """The `train/` and `test/` sub-corpora of `root`."""
        return cls.discover(Path(root) / "train"), cls.discover(Path(root) / "test")

    def __len__(self) -> int:
        return len(self.stories)

    def load_document(self, story: Story, analyzer: TextAnalyzer) -> Document:
        return analyzer.analyze(story.doc_id, read_text(story.text_path), str(story.text_path))

    def load_gold(self, story: Story, lang: str = "en") -> GoldSet:
        if story.key_path is None:
            raise MissingGoldError(
                f"Story {story.doc_id!r} has no {GOLD_SUFFIX} file in {self.root}"
            )
        return GoldSet.from_lines(story.doc_id, read_text(story.key_path).splitlines(), lang)

    def load_annotated(self, analyzer: TextAnalyzer) -> list[tuple[Document, GoldSet]]:
        """Every story with its gold set.

        Raises:
            MissingGoldError: If any story lacks gold keyphrases
        """
        missing = [story.doc_id for story in self.stories if not story.has_gold]
        if missing:
            raise MissingGoldError(
                f"{len(missing)} stories in {self.root} have no gold file: {', '.join(missing[:5])}"
            )
        return [
            (self.load_document(story, analyzer), self.load_gold(story, analyzer.language))
            for story in self.stories
        ]
