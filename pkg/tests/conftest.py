import json
from pathlib import Path

import pytest

from lace.model import policies_from_json
from lace.providers import MockEmbeddingProvider
from lace.repository import PolicyRepository
from lace.taxonomy import Taxonomy

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture()
def fixture_taxonomy() -> Taxonomy:
    return Taxonomy.from_file(FIXTURES / "taxonomy.json")


@pytest.fixture()
def home_policies():
    return policies_from_json(
        json.loads((FIXTURES / "home_policies.json").read_text())
    )


@pytest.fixture()
def conflict_pair():
    return policies_from_json(
        json.loads((FIXTURES / "conflict_pair.json").read_text())
    )


@pytest.fixture()
def home_repository(home_policies):
    repository = PolicyRepository(MockEmbeddingProvider(256))
    repository.index_policies(home_policies)
    return repository
