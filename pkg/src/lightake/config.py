"""Configuration management for lightake."""

import logging
import math
import os
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError, field_validator
from pydantic.fields import FieldInfo
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from .exceptions import ConfigurationError, CorpusIOError
from .summarizer import CentralityConfig, DistanceMetric, MetricKind, SscSpec

logger = logging.getLogger(__name__)

CONFIG_FILE_ENV = "LIGHTAKE_CONFIG_FILE"

# Fields that never change results and stay out of provenance records.
_NON_SEMANTIC_FIELDS = {"jobs", "config_file"}


def read_key_value_file(path: Path) -> dict[str, str]:
    """Parse a `key = value` config file; `#` starts a comment."""
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusIOError(f"Cannot read config file {path}: {e}") from e

    values: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CorpusIOError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().lower().replace("-", "_")] = value.strip()
    return values


class KeyValueFileSource(PydanticBaseSettingsSource):
    """Settings source backed by a simple `key = value` text file."""

    def __init__(self, settings_cls: type[BaseSettings], path: Optional[Path]):
        super().__init__(settings_cls)
        self.path = path
        self._values = read_key_value_file(path) if path else {}
        unknown = sorted(set(self._values) - set(settings_cls.model_fields))
        if unknown:
            logger.warning(f"Ignoring unknown keys in {path}: {', '.join(unknown)}")

    def get_field_value(self, field: FieldInfo, field_name: str) -> tuple[Any, str, bool]:
        return self._values.get(field_name), field_name, False

    def __call__(self) -> dict[str, Any]:
        return {
            name: value
            for name, value in self._values.items()
            if name in self.settings_cls.model_fields
        }


class PipelineConfig(BaseSettings):
    """Effective configuration of the filter → extract pipeline.

    Values are resolved from explicit arguments first, then LIGHTAKE_*
    environment variables, then the `key = value` file named by
    `config_file` (or LIGHTAKE_CONFIG_FILE), then the defaults below.
    Example:
        LIGHTAKE_CR=0.1
        LIGHTAKE_METRIC=manhattan
        LIGHTAKE_SSC=10%
    """

    model_config = SettingsConfigDict(
        env_prefix="LIGHTAKE_",
        case_sensitive=False,
        extra="ignore",
    )

    language: str = "en"

    # Light filtering
    cr: float = 0.10
    summary_cr: float = 0.50
    summary_sentences: Optional[int] = None
    metric: str = "manhattan"
    minkowski_p: float = 3.0
    ssc: str = "10%"

    # Extraction and training
    k: int = 10
    bags: int = 10
    seed: int = 13
    max_phrase_len: int = 3
    max_depth: int = 12
    min_leaf: int = 2
    override_cr: bool = False

    jobs: int = 1

    # Resources
    stopwords_path: Optional[Path] = None
    abbreviations_path: Optional[Path] = None
    pos_lexicon_path: Optional[Path] = None
    lm_path: Optional[Path] = None
    model_path: Optional[Path] = None
    index_path: Optional[Path] = None
    config_file: Optional[Path] = None

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        init_kwargs = getattr(init_settings, "init_kwargs", {})
        path = init_kwargs.get("config_file") or os.environ.get(CONFIG_FILE_ENV)
        return (
            init_settings,
            env_settings,
            KeyValueFileSource(settings_cls, Path(path) if path else None),
        )

    @field_validator("cr", "summary_cr")
    @classmethod
    def _check_ratio(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"compression ratio must be in [0, 1), got {value}")
        return value

    @field_validator("metric")
    @classmethod
    def _check_metric(cls, value: str) -> str:
        value = value.strip().lower()
        if value not in {kind.value for kind in MetricKind}:
            raise ValueError(f"unknown distance metric {value!r}")
        return value

    @field_validator("ssc")
    @classmethod
    def _check_ssc(cls, value: str) -> str:
        return SscSpec.parse(value).label

    @field_validator("minkowski_p")
    @classmethod
    def _check_p(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"minkowski_p must be finite and > 0, got {value}")
        return value

    @field_validator("k", "bags", "max_phrase_len", "max_depth", "min_leaf", "jobs")
    @classmethod
    def _check_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"must be >= 1, got {value}")
        return value

    @field_validator("summary_sentences")
    @classmethod
    def _check_summary_sentences(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError(f"summary_sentences must be >= 1, got {value}")
        return value

    @field_validator("language")
    @classmethod
    def _check_language(cls, value: str) -> str:
        value = value.strip().lower()
        if not value:
            raise ValueError("language code must not be empty")
        return value

    def distance_metric(self) -> DistanceMetric:
        return DistanceMetric(kind=MetricKind(self.metric), p=self.minkowski_p)

    def centrality(self) -> CentralityConfig:
        """Build the summarizer configuration selected by this config."""
        return CentralityConfig(metric=self.distance_metric(), ssc=SscSpec.parse(self.ssc))

    def centrality_for(self, metric: str, ssc: str) -> CentralityConfig:
        """Summarizer configuration for another metric/SSC pair, as swept by experiments."""
        name = metric.strip().lower()
        if name not in {kind.value for kind in MetricKind}:
            raise ConfigurationError(f"Unknown distance metric {metric!r}")
        return CentralityConfig(
            metric=DistanceMetric(kind=MetricKind(name), p=self.minkowski_p),
            ssc=SscSpec.parse(ssc),
        )

    def provenance(self) -> dict[str, Any]:
        """Effective configuration as a JSON-safe dict for output artifacts."""
        return self.model_dump(mode="json", exclude=_NON_SEMANTIC_FIELDS)


def get_config(**overrides: Any) -> PipelineConfig:
    """Get the pipeline configuration.

    Args:
        **overrides: Explicit values (typically command-line flags); None
            values are dropped so lower-precedence sources still apply.

    Returns:
        PipelineConfig instance with loaded configuration
    """
    given = {key: value for key, value in overrides.items() if value is not None}
    try:
        return PipelineConfig(**given)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e
