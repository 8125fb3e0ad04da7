import pytest
from fastapi.testclient import TestClient

from eventqa.plan_dsl import parse_plan
from eventqa.service import create_app, demo_deployment


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(demo_deployment()))


def _ask(client, question, **overrides):
    payload = {"question": question, "persona": "demo"}
    payload.update(overrides)
    return client.post("/api/ask", json=payload)


def test_ask_fig3_question(client):
    resp = _ask(client, "How often did I eat Italian food after a yoga workout?")
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["answer"] == "1"
    assert doc["trace"]["op"] == "APPLY"
    assert doc["answer_kind"] == "scalar"
    assert {"qud_ms", "execute_ms", "operators_ms"} <= set(doc["timings"])
    assert parse_plan(doc["plan"]).op == "APPLY"


def test_ask_superlative_month(client):
    resp = _ask(client, "The month I listened to Taylor Swift the most?")
    assert resp.status_code == 200
    assert resp.json()["answer"] == "2024-03"


def test_ask_retrieval_detail_in_trace(client):
    resp = _ask(client, "How often did I eat Italian food after a workout?")
    doc = resp.json()
    join = doc["trace"]["children"][0]
    retrieves = [c["children"][0] for c in join["children"]]
    for node in retrieves:
        assert node["op"] == "RETRIEVE"
        rows = node["detail"]["events"]
        assert rows and all({"event", "sparse", "classifier", "path", "retained"} <= set(r)
                            for r in rows)
    workout_rows = {r["event"] for r in retrieves[1]["detail"]["events"]}
    assert workout_rows == {"e1", "e3", "e4"}


def test_ask_statelessness(client):
    a = _ask(client, "How many yoga workouts did I do?").json()
    b = _ask(client, "How many yoga workouts did I do?").json()
    a.pop("timings"), b.pop("timings")

    def strip(doc):
        doc.pop("elapsed_ms", None)
        for child in doc.get("children", ()):
            strip(child)
        return doc

    assert strip(a["trace"]) == strip(b["trace"]) and a == b


def test_ask_empty_question_400(client):
    assert _ask(client, "   ").status_code == 400


def test_ask_unknown_persona_400(client):
    assert _ask(client, "q", persona="nobody").status_code == 400


def test_ask_bad_sources_400(client):
    assert _ask(client, "q", sources=["Telegraph"]).status_code == 400
    assert _ask(client, "q", sources=[]).status_code == 400


def test_ask_planning_failed_422(client):
    resp = _ask(client, "What is the meaning of life?", planner="template")
    assert resp.status_code == 422


def test_ask_sources_restriction(client):
    resp = _ask(client, "The month I listened to Taylor Swift the most?",
                sources=["CalendarEntry"])
    assert resp.status_code == 200
    assert resp.json()["answer"] == "no answer"


def test_ask_exec_error_returns_partial_trace():
    def broken_planner(question):
        return parse_plan('(SUM (EXTRACT (RETRIEVE "workout events") [workout_type]) workout_type)')

    app = create_app(demo_deployment(), planner=broken_planner)
    local = TestClient(app)
    resp = local.post("/api/ask", json={"question": "boom", "persona": "demo"})
    assert resp.status_code == 500
    doc = resp.json()
    assert "aggregate_on_non_numeric" in doc["error"]
    trace = doc["trace"]
    assert trace["op"] == "SUM" and trace["detail"]["error"]["cause"] == "aggregate_on_non_numeric"
    assert trace["children"][0]["op"] == "EXTRACT"
    assert trace["children"][0]["n_out"] == 2


def test_personas_listing(client):
    resp = client.get("/api/personas")
    assert resp.status_code == 200
    listing = resp.json()
    assert [p["name"] for p in listing] == ["demo"]
    demo = listing[0]
    assert demo["n_events"] == 9
    assert sum(demo["counts"].values()) == 9
    assert demo["counts"]["Workout"] == 2


def test_events_search_yoga(client):
    resp = client.get("/api/events", params={"persona": "demo", "query": "yoga"})
    doc = resp.json()
    assert doc["total"] == 2
    assert {e["id"] for e in doc["events"]} == {"e1", "e3"}


def test_events_sorted_desc_and_unknown_persona(client):
    doc = client.get("/api/events", params={"persona": "demo"}).json()
    starts = [e["start"] for e in doc["events"]]
    assert starts == sorted(starts, reverse=True)
    assert client.get("/api/events", params={"persona": "nobody"}).status_code == 404


def test_events_pagination_concatenates(client):
    pages = []
    page = 1
    while True:
        doc = client.get("/api/events",
                         params={"persona": "demo", "page": page, "page_size": 4}).json()
        assert doc["total"] == 9
        if not doc["events"]:
            break
        pages.extend(e["id"] for e in doc["events"])
        page += 1
    unpaged = client.get("/api/events", params={"persona": "demo", "page_size": 200}).json()
    assert pages == [e["id"] for e in unpaged["events"]]


def test_config_endpoint(client):
    doc = client.get("/api/config").json()
    assert doc["reference_date"] == "2024-11-25"
    assert "MusicStream" in doc["sources"]
    assert doc["retrieval"]["tau"] == 0.5
