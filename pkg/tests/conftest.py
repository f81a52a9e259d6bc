from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(label): a top-level acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        label = marker.kwargs.get("label", item.name)
        if report.passed:
            print(f"\nACCEPTANCE PASS  {label}", flush=True)
        elif report.failed:
            print(f"\nACCEPTANCE FAIL  {label}", flush=True)

from factcache.cache import InMemorySlowSource, TieredFactStore
from factcache.dataset import load_relation_templates
from factcache.models import MockTableModel
from factcache.pipeline import AliasIndex, Pipeline
from factcache.triples import FactTriple, Source, TripleSet

FIXTURES = Path(__file__).parent / "fixtures"

SNAPSHOT = datetime(2024, 1, 1, tzinfo=timezone.utc)


def triple(subject, relation, obj, **kwargs):
    return FactTriple(subject=subject, relation=relation, obj=obj, **kwargs)


@pytest.fixture
def templates():
    return load_relation_templates()


@pytest.fixture
def us_triples():
    return [
        triple("America", "head of government", "Joe Biden",
               source=Source.WIKIDATA, fetched_at=SNAPSHOT),
        triple("Joe Biden", "spouse", "Jill Biden",
               source=Source.WIKIDATA, fetched_at=SNAPSHOT),
        triple("Sioux Falls", "head of government", "Paul Ten Haken",
               source=Source.WIKIDATA, fetched_at=SNAPSHOT),
        triple("America", "capital", "Washington",
               source=Source.WIKIDATA, fetched_at=SNAPSHOT),
    ]


@pytest.fixture
def us_store(us_triples):
    slow = InMemorySlowSource(us_triples, snapshot_at=SNAPSHOT)
    return TieredFactStore(slow=slow, prefetch_depth=1)


@pytest.fixture
def us_pipeline(us_store, us_triples):
    aliases = AliasIndex.from_triples(TripleSet(us_triples))
    aliases.add("United States", "America")
    aliases.add("Biden", "Joe Biden")
    return Pipeline(store=us_store, aliases=aliases, model=MockTableModel())
