"""HTTP service: ask / personas / events / config endpoints.

Stores and indexes are built once per deployment and shared read-only by
request handlers; the trace always travels inline with the response, even
when execution fails partway."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from . import qud
from .engine import EngineConfig, ExecError, execute, render_answer
from .events import EventStore, SourceKind, verbalize
from .extract import DefaultExtractor, Gazetteer
from .ingest import event_record, load_events, sidecar_tables
from .plan_dsl import serialize_plan
from .qud import LlmClient, LlmClientConfig, PlanningFailed
from .retrieve import ExpansionTable, QueryAnalyzer, RetrievalConfig, SparseIndex, build_index

DEFAULT_REFERENCE_DATE = date(2024, 11, 25)


@dataclass
class PersonaBundle:
    store: EventStore
    index: SparseIndex
    retrieval: RetrievalConfig
    extractor: DefaultExtractor
    profile: Optional[dict] = None


def make_bundle(store: EventStore, gazetteer: Optional[Gazetteer] = None,
                expansion: Optional[ExpansionTable] = None,
                retrieval: Optional[RetrievalConfig] = None,
                profile: Optional[dict] = None) -> PersonaBundle:
    if retrieval is None:
        analyzer = QueryAnalyzer(expansions=expansion) if expansion is not None else None
        retrieval = RetrievalConfig(analyzer=analyzer)
    return PersonaBundle(store=store, index=build_index(store), retrieval=retrieval,
                         extractor=DefaultExtractor(gazetteer) if gazetteer is not None else DefaultExtractor(),
                         profile=profile)


@dataclass
class Deployment:
    bundles: dict = field(default_factory=dict)
    reference_date: date = DEFAULT_REFERENCE_DATE
    preview: int = 5
    llm_client: Optional[LlmClient] = None
    llm_config: Optional[LlmClientConfig] = None

    def add_store(self, store: EventStore, gazetteer=None, expansion=None, profile=None):
        for persona in store.personas():
            self.bundles[persona] = make_bundle(store.subset(persona), gazetteer, expansion,
                                                profile=profile)


def demo_deployment() -> Deployment:
    path = resources.files("eventqa").joinpath("data", "fixture_demo.jsonl")
    deployment = Deployment()
    deployment.add_store(load_events(str(path)))
    return deployment


def deployment_from_files(paths, llm_client=None, llm_config=None) -> Deployment:
    deployment = Deployment(llm_client=llm_client, llm_config=llm_config)
    for path in paths:
        store = load_events(path)
        gazetteer, expansion = sidecar_tables(path)
        profile = None
        candidate = Path(str(path).replace(".events.jsonl", ".profile.json"))
        if candidate != Path(str(path)) and candidate.exists():
            import json
            profile = json.loads(candidate.read_text(encoding="utf-8"))
        deployment.add_store(store, gazetteer, expansion, profile)
    return deployment


class AskRequest(BaseModel):
    question: str
    persona: str
    sources: Optional[List[str]] = None
    reference_date: Optional[date] = None
    planner: str = "auto"


class AskResponse(BaseModel):
    answer: str
    answer_kind: str
    plan: str
    trace: dict
    timings: dict


def _operator_timings(trace_doc: dict) -> dict:
    out = {trace_doc["id"]: trace_doc["elapsed_ms"]}
    for child in trace_doc["children"]:
        out.update(_operator_timings(child))
    return out


def _error(status: int, message: str, **extra):
    return JSONResponse(status_code=status, content={"error": message, **extra})


def create_app(deployment: Optional[Deployment] = None, planner=None) -> FastAPI:
    """Builds the API over a deployment. `planner` overrides question
    planning (callable question -> OperatorTree), mainly for tests and
    custom planner stacks."""
    deployment = deployment or demo_deployment()
    app = FastAPI(title="eventqa", version="0.1.0")

    def plan_for(question: str, mode: str):
        if planner is not None:
            tree = planner(question)
            if tree is None:
                raise PlanningFailed("planner returned no plan")
            return tree
        return qud.plan_question(question, mode, deployment.llm_client, deployment.llm_config)

    @app.post("/api/ask")
    def ask(request: AskRequest):
        if not request.question.strip():
            return _error(400, "question must not be empty")
        bundle = deployment.bundles.get(request.persona)
        if bundle is None:
            return _error(400, f"unknown persona {request.persona!r}")
        if request.planner not in ("template", "llm", "auto"):
            return _error(400, f"unknown planner {request.planner!r}")
        if request.sources is None:
            enabled = frozenset(SourceKind)
        else:
            try:
                enabled = frozenset(SourceKind.parse(s) for s in request.sources)
            except ValueError as err:
                return _error(400, str(err))
            if not enabled:
                return _error(400, "sources must not be empty")
        cfg = EngineConfig(
            reference_date=request.reference_date or deployment.reference_date,
            enabled_sources=enabled,
            retrieval=bundle.retrieval,
            extractor=bundle.extractor,
            preview=deployment.preview,
            index=bundle.index,
        )
        t0 = time.perf_counter()
        try:
            tree = plan_for(request.question, request.planner)
        except PlanningFailed as err:
            return _error(422, f"planning failed: {err}")
        qud_ms = (time.perf_counter() - t0) * 1000.0
        plan_text = serialize_plan(tree)
        t1 = time.perf_counter()
        try:
            answer, trace = execute(tree, bundle.store, cfg)
        except ExecError as err:
            trace_doc = err.trace.to_doc() if err.trace is not None else None
            return _error(500, str(err), plan=plan_text, trace=trace_doc,
                          timings={"qud_ms": round(qud_ms, 3),
                                   "execute_ms": round((time.perf_counter() - t1) * 1000.0, 3)})
        execute_ms = (time.perf_counter() - t1) * 1000.0
        trace_doc = trace.to_doc()
        return AskResponse(
            answer=render_answer(answer),
            answer_kind=answer.kind,
            plan=plan_text,
            trace=trace_doc,
            timings={"qud_ms": round(qud_ms, 3), "execute_ms": round(execute_ms, 3),
                     "operators_ms": {k: round(v, 3) for k, v in _operator_timings(trace_doc).items()}},
        )

    @app.get("/api/personas")
    def personas():
        out = []
        for name in sorted(deployment.bundles):
            bundle = deployment.bundles[name]
            counts = {}
            for event in bundle.store:
                counts[event.source.wire_name] = counts.get(event.source.wire_name, 0) + 1
            doc = {"name": name, "counts": counts, "n_events": len(bundle.store)}
            if len(bundle.store):
                doc["date_range"] = {
                    "start": min(e.scope.start for e in bundle.store).strftime("%Y-%m-%dT%H:%M"),
                    "end": max(e.scope.end for e in bundle.store).strftime("%Y-%m-%dT%H:%M"),
                }
            if bundle.profile:
                doc["profile"] = bundle.profile
            out.append(doc)
        return out

    @app.get("/api/events")
    def events(persona: str, query: Optional[str] = None, page: int = 1, page_size: int = 20):
        bundle = deployment.bundles.get(persona)
        if bundle is None:
            return _error(404, f"unknown persona {persona!r}")
        page = max(page, 1)
        page_size = min(max(page_size, 1), 200)
        rows = sorted(bundle.store, key=lambda e: (e.scope.start, e.id), reverse=True)
        if query:
            needle = query.lower()
            rows = [e for e in rows if needle in verbalize(e)]
        total = len(rows)
        window = rows[(page - 1) * page_size:page * page_size]
        return {"persona": persona, "total": total, "page": page, "page_size": page_size,
                "events": [event_record(e) for e in window]}

    @app.get("/api/config")
    def config():
        sample = next(iter(deployment.bundles.values()), None)
        retrieval = sample.retrieval if sample else RetrievalConfig()
        return {
            "reference_date": deployment.reference_date.isoformat(),
            "sources": [kind.wire_name for kind in SourceKind],
            "planners": ["template", "llm", "auto"],
            "llm_enabled": deployment.llm_client is not None,
            "preview": deployment.preview,
            "retrieval": {"top_k": retrieval.top_k, "k1": retrieval.k1, "b": retrieval.b,
                          "tau": retrieval.tau, "tau_hi": retrieval.tau_hi,
                          "tau_lo": retrieval.tau_lo,
                          "representatives": retrieval.representatives},
        }

    ui_dir = Path(__file__).resolve().parent.parent.parent / "frontend"

    @app.get("/")
    def root():
        index = ui_dir / "index.html"
        if index.exists():
            return FileResponse(index)
        return JSONResponse({"service": "eventqa", "endpoints": ["/api/ask", "/api/personas",
                                                                 "/api/events", "/api/config"]})

    if (ui_dir / "dist").exists():
        from fastapi.staticfiles import StaticFiles
        app.mount("/dist", StaticFiles(directory=str(ui_dir / "dist")), name="ui")

    return app
