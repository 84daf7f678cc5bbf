from pathlib import Path

import pytest

from app.core.config import ModelConfig
from app.models.dataset import load_case
from app.models.ontology import parse_turtle

FIXTURES = Path(__file__).parent / "fixtures"
CASES = FIXTURES / "cases"
CANDIDATES = FIXTURES / "candidates"
PITFALLS = FIXTURES / "pitfalls"
CONFIGS = FIXTURES / "configs"


def read_ttl(path: Path):
    return parse_turtle(path.read_text(encoding="utf-8"))


def mock_config(case: str, **overrides) -> ModelConfig:
    values = dict(
        backend="mock",
        model_name="mock-model",
        mock_replies=CASES / case / "replies",
        max_retries=2,
        backoff_base=0,
        concurrency=3,
        api_key_env="ONTODRAFT_TEST_API_KEY",
    )
    values.update(overrides)
    return ModelConfig(**values)


@pytest.fixture(autouse=True)
def _no_api_key(monkeypatch):
    monkeypatch.delenv("ONTODRAFT_TEST_API_KEY", raising=False)


@pytest.fixture
def book_case():
    return load_case(CASES / "book")


@pytest.fixture
def library_case():
    return load_case(CASES / "library")


@pytest.fixture
def theatre_case():
    return load_case(CASES / "theatre")


@pytest.fixture
def part_a():
    return read_ttl(CANDIDATES / "book_part_a.ttl")


@pytest.fixture
def part_b():
    return read_ttl(CANDIDATES / "book_part_b.ttl")
