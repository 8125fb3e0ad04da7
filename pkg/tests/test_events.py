from datetime import date, datetime, timedelta

import pytest
from hypothesis import given, strategies as st

from eventqa.events import (Event, EventStore, SourceKind, TemporalScope, temporal_overlap,
                            value_compare, verbalize)


def scope(start, end=None):
    return TemporalScope(start, end or start)


def test_verbalize_workout_canonical_format(demo_store):
    e1 = demo_store.by_id["e1"]
    assert verbalize(e1) == ("workout | duration_min: 60 | workout_type: yoga"
                             " | from 2024-03-01t07:00 to 2024-03-01t08:00")


def test_verbalize_text_passthrough(demo_store):
    assert "yoga" in verbalize(demo_store.by_id["e3"])


def test_verbalize_deterministic(demo_store):
    for event in demo_store:
        assert verbalize(event) == verbalize(event)


def test_temporal_overlap_identity():
    s = scope(datetime(2024, 3, 1, 7), datetime(2024, 3, 1, 8))
    assert temporal_overlap(s, s)


def test_temporal_overlap_point_in_interval(demo_store):
    e1, e3, e4 = (demo_store.by_id[i] for i in ("e1", "e3", "e4"))
    assert temporal_overlap(e1.scope, e3.scope)
    assert not temporal_overlap(e1.scope, e4.scope)


_times = st.datetimes(min_value=datetime(2023, 1, 1), max_value=datetime(2025, 1, 1))


@st.composite
def scopes(draw):
    a = draw(_times)
    b = draw(_times)
    return TemporalScope(min(a, b), max(a, b))


@given(scopes(), scopes())
def test_temporal_overlap_symmetric(a, b):
    assert temporal_overlap(a, b) == temporal_overlap(b, a)


@given(scopes())
def test_temporal_overlap_reflexive(a):
    assert temporal_overlap(a, a)


def test_value_compare_examples():
    assert value_compare(3, 3.0) == 0
    assert value_compare(date(2024, 3, 1), datetime(2024, 3, 1, 19)) == -1
    assert value_compare("yoga", 1) is None
    assert value_compare(None, 5) is None
    assert value_compare("Yoga", "yoga") == 0
    assert value_compare(timedelta(minutes=30), timedelta(minutes=90)) == -1


_comparable_pools = (
    st.integers(-50, 50) | st.floats(-50, 50, allow_nan=False),
    st.text(max_size=5),
    st.dates(date(2023, 1, 1), date(2025, 1, 1)) | _times,
    st.timedeltas(timedelta(0), timedelta(hours=40)),
)


@given(st.data())
def test_value_compare_antisymmetric_and_transitive(data):
    pool = data.draw(st.sampled_from(_comparable_pools))
    a, b, c = data.draw(pool), data.draw(pool), data.draw(pool)
    ab, ba = value_compare(a, b), value_compare(b, a)
    assert ab is not None and ba == -ab
    if value_compare(a, b) <= 0 and value_compare(b, c) <= 0:
        assert value_compare(a, c) <= 0


def test_store_ordering_is_function_of_multiset():
    def ev(i, start):
        return Event(id=f"x{i}", persona="p", source=SourceKind.MAIL,
                     scope=scope(start), text="hello")

    events = [ev(1, datetime(2024, 2, 1, 10)), ev(2, datetime(2024, 1, 1, 10)),
              ev(3, datetime(2024, 2, 1, 10))]
    a = EventStore(events)
    b = EventStore(list(reversed(events)))
    assert [e.id for e in a] == [e.id for e in b] == ["x2", "x1", "x3"]


def test_store_rejects_duplicate_ids():
    e = Event(id="dup", persona="p", source=SourceKind.MAIL, scope=scope(datetime(2024, 1, 1)),
              text="hi")
    with pytest.raises(ValueError):
        EventStore([e, e])


def test_event_validation():
    with pytest.raises(ValueError):
        Event(id="bad", persona="p", source=SourceKind.MAIL,
              scope=scope(datetime(2024, 1, 1)), fields={"BadKey": 1})
    with pytest.raises(ValueError):
        Event(id="empty", persona="p", source=SourceKind.MAIL, scope=scope(datetime(2024, 1, 1)))
    with pytest.raises(ValueError):
        TemporalScope(datetime(2024, 1, 2), datetime(2024, 1, 1))


def test_source_kind_parsing():
    assert SourceKind.parse("MusicStream") is SourceKind.MUSIC_STREAM
    assert SourceKind.parse("music_stream") is SourceKind.MUSIC_STREAM
    assert SourceKind.MUSIC_STREAM.wire_name == "MusicStream"
    with pytest.raises(ValueError):
        SourceKind.parse("Telegraph")
