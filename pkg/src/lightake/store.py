"""File-based index record store and keyphrase cloud export."""

import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigurationError, CorpusIOError, DataError

logger = logging.getLogger(__name__)

# Keyphrases scored below this are flagged as low confidence.
CONFIDENCE_THRESHOLD = 0.5
DEFAULT_CLOUD_SIZE = 10


class RecordKeyphrase(BaseModel):
    model_config = ConfigDict(frozen=True)

    phrase: str
    normalized: str
    score: float = Field(ge=0.0, le=1.0)
    low_confidence: bool = False


class IndexRecord(BaseModel):
    """Keyphrases and display summary indexed for one story."""

    model_config = ConfigDict(frozen=True)

    doc_id: str
    keyphrases: tuple[RecordKeyphrase, ...]
    cr: float
    k: int = Field(ge=1)
    timings_ms: dict[str, float] = {}
    summary: tuple[str, ...] = ()
    config: dict[str, Any] = {}

    @model_validator(mode="after")
    def _check_length(self) -> "IndexRecord":
        if len(self.keyphrases) > self.k:
            raise ValueError(f"{len(self.keyphrases)} keyphrases exceed k={self.k}")
        return self


class IndexStore:
    """Append-only JSON-lines file of IndexRecords."""

    def __init__(self, path: Path):
        self.path = Path(path)

    def append(self, records: Iterable[IndexRecord]) -> int:
        lines = [record.model_dump_json() + "\n" for record in records]
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as f:
                f.writelines(lines)
        except OSError as e:
            raise CorpusIOError(f"Cannot write index store {self.path}: {e}") from e
        logger.debug(f"Appended {len(lines)} records to {self.path}")
        return len(lines)

    def read(self) -> list[IndexRecord]:
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except (OSError, UnicodeDecodeError) as e:
            raise CorpusIOError(f"Cannot read index store {self.path}: {e}") from e

        records = []
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                records.append(IndexRecord.model_validate_json(line))
            except ValidationError as e:
                raise DataError(f"{self.path}:{lineno}: invalid index record: {e}") from e
        return records

    def get(self, doc_id: str) -> Optional[IndexRecord]:
        """Latest record for `doc_id`, if any."""
        found = None
        for record in self.read():
            if record.doc_id == doc_id:
                found = record
        return found


class CloudEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    phrase: str
    weight: float
    doc_ids: tuple[str, ...]


def build_cloud(records: Sequence[IndexRecord], top: int = DEFAULT_CLOUD_SIZE) -> list[CloudEntry]:
    """Aggregate keyphrase scores across records.

    Phrases are grouped by normalized form and shown with the first surface
    seen; weights are summed scores. Sorted by weight descending, then
    phrase, and truncated to `top`.
    """
    if top < 1:
        raise ConfigurationError(f"Cloud size must be >= 1, got {top}")
    if not records:
        raise DataError("No index records to build a cloud from")

    surfaces: dict[str, str] = {}
    scores: dict[str, list[float]] = {}
    docs: dict[str, list[str]] = {}
    for record in records:
        for keyphrase in record.keyphrases:
            key = keyphrase.normalized
            surfaces.setdefault(key, keyphrase.phrase)
            scores.setdefault(key, []).append(keyphrase.score)
            seen = docs.setdefault(key, [])
            if record.doc_id not in seen:
                seen.append(record.doc_id)

    entries = [
        CloudEntry(phrase=surfaces[key], weight=math.fsum(scores[key]), doc_ids=tuple(docs[key]))
        for key in surfaces
    ]
    entries.sort(key=lambda entry: (-entry.weight, entry.phrase))
    return entries[:top]


def cloud_json(entries: Sequence[CloudEntry]) -> str:
    return json.dumps([entry.model_dump(mode="json") for entry in entries], indent=2)
