import pathlib

import pytest

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def sample_log_text() -> str:
    return (DATA_DIR / "sample_sessions.log").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def junk_corpus_path() -> pathlib.Path:
    return DATA_DIR / "junk_corpus.tsv"


@pytest.fixture(scope="session")
def toy_corpus_path() -> pathlib.Path:
    return DATA_DIR / "toy_corpus.tsv"
