from importlib import resources

import pytest

from eventqa.engine import EngineConfig
from eventqa.extract import DefaultExtractor
from eventqa.ingest import default_profile, generate_dataset, load_events
from eventqa.retrieve import QueryAnalyzer, RetrievalConfig, build_index


@pytest.fixture(scope="session")
def demo_store():
    path = resources.files("eventqa").joinpath("data", "fixture_demo.jsonl")
    return load_events(str(path))


@pytest.fixture(scope="session")
def demo_index(demo_store):
    return build_index(demo_store)


@pytest.fixture()
def demo_cfg(demo_index):
    return EngineConfig(index=demo_index)


@pytest.fixture(scope="session")
def gen_data():
    """Small generated persona shared by retrieval / extraction properties."""
    profile = default_profile("gen", total_events=400, seed=7)
    return generate_dataset(profile, seed=42, duplicate_fraction=0.3)


@pytest.fixture(scope="session")
def gen_cfg(gen_data):
    return EngineConfig(
        retrieval=RetrievalConfig(analyzer=QueryAnalyzer(expansions=gen_data.expansion)),
        extractor=DefaultExtractor(gen_data.gazetteer),
        index=build_index(gen_data.store),
    )
