import json

import pytest

from eventqa.engine import Answer, render_answer
from eventqa.events import SourceKind, temporal_overlap
from eventqa.ingest import (ParseError, UnknownTemplate, default_profile, event_record,
                            generate_dataset, generate_persona, generate_questions, load_cases,
                            load_events, oracle_answer, sidecar_tables, write_cases,
                            write_dataset, write_events)
from eventqa.plan_dsl import serialize_plan


def test_load_f1_sorted_by_start(demo_store):
    assert [e.id for e in demo_store] == ["e9", "e1", "e3", "e6", "e2", "e4", "e5", "e8", "e7"]
    assert len(demo_store) == 9


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert len(load_events(path)) == 0


def test_load_missing_source_is_parse_error(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"persona": "p", "start": "2024-01-01T10:00", "end": "2024-01-01T10:00", '
                    '"text": "x"}\n', encoding="utf-8")
    with pytest.raises(ParseError) as err:
        load_events(path)
    assert err.value.line == 1 and "source" in err.value.reason


def test_load_unknown_source_kind(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = '{"persona": "p", "source": "Workout", "start": "2024-01-01T10:00", "end": "2024-01-01T10:30", "fields": {"workout_type": "yoga"}}\n'
    bad = good.replace("Workout", "Telegram")
    path.write_text(good + bad, encoding="utf-8")
    with pytest.raises(ParseError) as err:
        load_events(path)
    assert err.value.line == 2


def test_load_bad_timestamp(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"persona": "p", "source": "Mail", "start": "2024-01-01 10:00", '
                    '"end": "2024-01-01T10:00", "text": "x"}\n', encoding="utf-8")
    with pytest.raises(ParseError):
        load_events(path)


def test_load_assigns_ids_from_record_order(tmp_path):
    path = tmp_path / "noids.jsonl"
    rec = {"persona": "p", "source": "Mail", "start": "2024-01-01T10:00",
           "end": "2024-01-01T10:00", "text": "x"}
    rec2 = dict(rec, start="2024-01-02T10:00", end="2024-01-02T10:00")
    path.write_text(json.dumps(rec) + "\n" + json.dumps(rec2) + "\n", encoding="utf-8")
    store = load_events(path)
    assert sorted(store.by_id) == ["evt_00001", "evt_00002"]


def test_events_round_trip(tmp_path, demo_store):
    path = tmp_path / "copy.jsonl"
    write_events(demo_store, path)
    again = load_events(path)
    assert [event_record(e) for e in again] == [event_record(e) for e in demo_store]


def test_generator_determinism():
    profile = default_profile("p", total_events=120, seed=3)
    a = generate_persona(profile, seed=9)
    b = generate_persona(profile, seed=9)
    assert [event_record(e) for e in a] == [event_record(e) for e in b]
    c = generate_persona(profile, seed=10)
    assert [event_record(e) for e in a] != [event_record(e) for e in c]


def test_generator_count_contract():
    profile = default_profile("p", total_events=150, seed=1)
    dataset = generate_dataset(profile, seed=4, duplicate_fraction=0.0)
    by_kind = {}
    for event in dataset.store:
        by_kind[event.source] = by_kind.get(event.source, 0) + 1
    assert by_kind == {k: v for k, v in profile.counts.items() if v}
    assert dataset.planted_pairs == ()


def test_generator_duplicate_fraction_and_overlap():
    profile = default_profile("p", total_events=200, seed=2)
    dataset = generate_dataset(profile, seed=5, duplicate_fraction=0.5)
    assert dataset.planted_pairs
    for original_id, dup_id in dataset.planted_pairs:
        original = dataset.store.by_id[original_id]
        dup = dataset.store.by_id[dup_id]
        assert temporal_overlap(original.scope, dup.scope)
        assert original.source != dup.source


def test_generator_workout_only_profile():
    profile = default_profile("p", total_events=50, seed=1)
    counts = {kind: 0 for kind in profile.counts}
    counts[SourceKind.WORKOUT] = 10
    profile = type(profile)(name="w", preferences=profile.preferences,
                            date_range=profile.date_range, counts=counts)
    dataset = generate_dataset(profile, seed=6, duplicate_fraction=0.5)
    workouts = [e for e in dataset.store if e.source is SourceKind.WORKOUT]
    assert len(workouts) == 10
    assert len(dataset.planted_pairs) == 5


def test_generate_questions_zero_and_gold_consistency(gen_data):
    profile = gen_data.profile
    assert generate_questions(gen_data.store, profile, seed=1, n=0) == []
    cases = generate_questions(gen_data.store, profile, seed=1, n=20)
    assert len(cases) == 20
    for case in cases:
        gold = oracle_answer(gen_data.store, case.template_id, case.slots)
        assert render_answer(gold) == render_answer(case.answer)


def test_oracle_examples(demo_store):
    yoga_only = oracle_answer(demo_store, "count_meals_after_workout_typed",
                              {"cuisine": "italian", "wt": "yoga"})
    assert yoga_only == Answer.scalar(1)
    both = oracle_answer(demo_store, "count_meals_after_workout", {"cuisine": "italian"})
    assert both == Answer.scalar(2)
    april = oracle_answer(demo_store, "count_streams_artist_month",
                          {"artist": "Taylor Swift", "month": "2024-04"})
    assert april == Answer.scalar(1)


def test_oracle_empty_store_counts():
    from eventqa.events import EventStore
    empty = EventStore([])
    assert oracle_answer(empty, "count_workouts_type", {"wt": "yoga"}) == Answer.scalar(0)


def test_oracle_unknown_template(demo_store):
    with pytest.raises(UnknownTemplate):
        oracle_answer(demo_store, "no_such_template", {})


def test_write_and_load_cases(tmp_path, gen_data):
    cases = generate_questions(gen_data.store, gen_data.profile, seed=2, n=5)
    path = tmp_path / "cases.jsonl"
    write_cases(cases, path)
    loaded = load_cases(path)
    assert [c.question for c in loaded] == [c.question for c in cases]
    assert [serialize_plan(c.plan) for c in loaded] == [serialize_plan(c.plan) for c in cases]
    assert [render_answer(c.answer) for c in loaded] == [render_answer(c.answer) for c in cases]


def test_write_dataset_and_sidecars(tmp_path, gen_data):
    paths = write_dataset(gen_data, tmp_path, "demo_gen")
    store = load_events(paths["events"])
    assert len(store) == len(gen_data.store)
    gazetteer, expansion = sidecar_tables(paths["events"])
    assert gazetteer is not None and expansion is not None
    assert expansion.entries == gen_data.expansion.entries
    pairs = json.loads(paths["pairs"].read_text(encoding="utf-8"))
    assert len(pairs) == len(gen_data.planted_pairs)
