"""Pytest configuration and fixtures."""

import os
from pathlib import Path
from typing import Callable

import pytest

from lightake.ake import ExtractionContext, PosLexicon
from lightake.corpus import CorpusLayout
from lightake.langmodel import DomainLM
from lightake.synthetic import generate_corpus
from lightake.textcore import Document, TextAnalyzer, build_idf

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep LIGHTAKE_* variables from the developer's shell out of the tests."""
    for name in list(os.environ):
        if name.startswith("LIGHTAKE_"):
            monkeypatch.delenv(name)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def analyzer() -> TextAnalyzer:
    return TextAnalyzer("en")


@pytest.fixture
def make_document(analyzer: TextAnalyzer) -> Callable[..., Document]:
    """Build a Document from raw text."""

    def _make(text: str, doc_id: str = "doc") -> Document:
        return analyzer.analyze(doc_id, text)

    return _make


@pytest.fixture
def make_context(analyzer: TextAnalyzer) -> Callable[..., ExtractionContext]:
    """Extraction context whose IDF and language model come from the given documents."""

    def _make(*documents: Document, max_phrase_len: int = 3) -> ExtractionContext:
        lm = DomainLM.train(s.stems for d in documents for s in d.sentences)
        return ExtractionContext(
            idf=build_idf(list(documents)),
            lm=lm,
            pos=PosLexicon.bundled("en"),
            stopwords=analyzer.stopwords,
            max_phrase_len=max_phrase_len,
        )

    return _make


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> Path:
    """Synthetic corpus small enough for end-to-end CLI tests."""
    root = tmp_path_factory.mktemp("small-corpus")
    generate_corpus(root, n_train=12, n_test=4, seed=3)
    return root


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory) -> tuple[Path, CorpusLayout, CorpusLayout]:
    """Full-size synthetic corpus: 50 training and 10 test stories."""
    root = tmp_path_factory.mktemp("synthetic-corpus")
    train, test = generate_corpus(root, n_train=50, n_test=10, seed=7)
    return root, train, test
