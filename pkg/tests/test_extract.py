from datetime import date, datetime

import pytest

from eventqa.extract import (DefaultExtractor, ExtractorUnavailable, Gazetteer, RemoteExtractor,
                             default_extract_value, default_gazetteer, extract)
from eventqa.results import ResultItem
from eventqa.retrieve import RetrievalConfig, retrieve


@pytest.fixture()
def workout_items(demo_store, demo_index):
    items, _ = retrieve("workout events", demo_store, demo_index, RetrievalConfig())
    return items


def test_extract_workout_type_on_merged_and_single(workout_items):
    out, detail = extract(workout_items, ("workout_type",), DefaultExtractor())
    values = {tuple(e.id for e in item.events): item.attrs["workout_type"] for item in out}
    assert values[("e1", "e3")] == "yoga"
    assert values[("e4",)] == "running"
    assert detail[1]["pairs"] == {"workout_type": "running"}


def test_extract_cuisine_via_gazetteer(demo_store):
    item = ResultItem(events=(demo_store.by_id["e2"],))
    assert default_extract_value(item, "cuisine", default_gazetteer()) == "italian"
    pizza = ResultItem(events=(demo_store.by_id["e5"],))
    assert default_extract_value(pizza, "cuisine", default_gazetteer()) == "italian"
    stream = ResultItem(events=(demo_store.by_id["e6"],))
    assert default_extract_value(stream, "cuisine", default_gazetteer()) is None


def test_extract_temporal_keys(demo_store):
    merged = ResultItem(events=(demo_store.by_id["e1"], demo_store.by_id["e3"]))
    gaz = default_gazetteer()
    assert default_extract_value(merged, "date", gaz) == date(2024, 3, 1)
    assert default_extract_value(merged, "start_time", gaz) == datetime(2024, 3, 1, 7, 0)
    assert default_extract_value(merged, "end_time", gaz) == datetime(2024, 3, 1, 8, 0)
    assert default_extract_value(merged, "month", gaz) == "2024-03"
    assert default_extract_value(merged, "year", gaz) == 2024
    assert default_extract_value(merged, "weekday", gaz) == "friday"


def test_temporal_keys_use_canonical_constituent(demo_store):
    # e3 (post, 07:30) merged with e1 (workout, 07:00): the workout wins
    merged = ResultItem(events=(demo_store.by_id["e3"], demo_store.by_id["e1"]))
    assert default_extract_value(merged, "start_time", default_gazetteer()) == \
        datetime(2024, 3, 1, 7, 0)


def test_extract_alias_lookup(demo_store):
    gaz = Gazetteer(aliases=(("title", ("summary",)),))
    item = ResultItem(events=(demo_store.by_id["e2"],))
    assert default_extract_value(item, "title", gaz) == "Dinner at Trattoria Roma"


def test_extract_never_overwrites(workout_items):
    extractor = DefaultExtractor()
    once, _ = extract(workout_items, ("workout_type",), extractor)
    pinned = [ResultItem(events=item.events, attrs={**item.attrs, "workout_type": "keep-me"})
              for item in workout_items]
    out, _ = extract(pinned, ("workout_type",), extractor)
    assert all(item.attrs["workout_type"] == "keep-me" for item in out)


def test_extract_preserves_order_and_length(workout_items):
    out, detail = extract(workout_items, ("date", "month"), DefaultExtractor())
    assert len(out) == len(workout_items) == len(detail)
    assert [item.events for item in out] == [item.events for item in workout_items]


def test_extract_idempotent(workout_items):
    extractor = DefaultExtractor()
    once, _ = extract(workout_items, ("date", "workout_type"), extractor)
    twice, _ = extract(once, ("date", "workout_type"), extractor)
    assert [item.attrs for item in twice] == [item.attrs for item in once]


def test_extract_non_destructive(workout_items):
    before = [dict(item.attrs) for item in workout_items]
    fields_before = [dict(e.fields) for item in workout_items for e in item.events]
    extract(workout_items, ("date", "cuisine"), DefaultExtractor())
    assert [dict(item.attrs) for item in workout_items] == before
    assert [dict(e.fields) for item in workout_items for e in item.events] == fields_before


class _FailingExtractor:
    def extract(self, item, key):
        raise ExtractorUnavailable("model down")


def test_extractor_failure_yields_null_and_is_recorded(workout_items):
    out, detail = extract(workout_items, ("cuisine",), _FailingExtractor())
    assert all(item.attrs["cuisine"] is None for item in out)
    assert all(row["errors"]["cuisine"] == "model down" for row in detail)


def test_remote_extractor_contract(demo_store):
    def transport(url, payload):
        assert set(payload) == {"verbalization", "text", "key"}
        return {"value": "italian"}

    extractor = RemoteExtractor("http://x/extract", transport=transport)
    item = ResultItem(events=(demo_store.by_id["e2"],))
    assert extractor.extract(item, "cuisine") == "italian"

    def broken(url, payload):
        raise OSError("no route")

    with pytest.raises(ExtractorUnavailable):
        RemoteExtractor("http://x/extract", transport=broken).extract(item, "cuisine")


def test_gazetteer_parse_and_first_match_wins():
    gaz = Gazetteer.parse("cuisine\tpizza\titalian\ncuisine\tpizza oven\tkitchenware\n")
    assert gaz.match("cuisine", "wood-fired pizza oven") == "italian"
    assert gaz.match("cuisine", "nothing here") is None


def test_extraction_complete_on_generated_data(gen_data, gen_cfg):
    # template-required keys never come back Null with the emitted gazetteer
    cuisine = gen_data.profile.preferences["cuisines"][0]
    items, _ = retrieve(f"instances of eating {cuisine} food", gen_data.store, gen_cfg.index,
                        gen_cfg.retrieval)
    assert items, "expected at least one meal for a preferred cuisine"
    out, _ = extract(items, ("date", "start_time", "cuisine"), gen_cfg.extractor)
    for item in out:
        assert item.attrs["date"] is not None
        assert item.attrs["start_time"] is not None
        assert item.attrs["cuisine"] == cuisine
