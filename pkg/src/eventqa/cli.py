"""Command-line interface: ask, plan, generate, eval, serve, events.

Exit codes: 0 success, 1 user error (bad arguments, unknown persona, parse
failures in inputs), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from importlib import resources
from pathlib import Path

from . import evalkit, ingest, qud
from .engine import EngineConfig, ExecError, execute, render_answer
from .events import SourceKind
from .extract import DefaultExtractor
from .plan_dsl import PlanError, serialize_plan
from .qud import LlmClient, LlmClientConfig, PlanningFailed
from .retrieve import ExpansionTable, QueryAnalyzer, RetrievalConfig, build_index
from .service import create_app, demo_deployment, deployment_from_files


class UserError(Exception):
    pass


def read_config(path) -> dict:
    """`key = value` lines; '#' starts a comment."""
    settings = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UserError(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        settings[key.strip()] = value.strip()
    return settings


def _float(settings, key, default):
    return float(settings.get(key, default))


def _retrieval_from_settings(settings: dict, expansion=None) -> RetrievalConfig:
    analyzer = None
    stopwords = None
    if "stopwords_path" in settings:
        from .retrieve import load_stopwords
        stopwords = load_stopwords(Path(settings["stopwords_path"]).read_text(encoding="utf-8"))
    if "expansion_path" in settings:
        expansion = ExpansionTable.parse(Path(settings["expansion_path"]).read_text(encoding="utf-8"))
    if stopwords is not None or expansion is not None:
        analyzer = QueryAnalyzer(stopwords=stopwords, expansions=expansion)
    return RetrievalConfig(
        top_k=int(settings.get("top_k", 1000)),
        k1=_float(settings, "k1", 1.2),
        b=_float(settings, "b", 0.75),
        tau=_float(settings, "tau", 0.5),
        tau_hi=_float(settings, "tau_hi", 0.8),
        tau_lo=_float(settings, "tau_lo", 0.2),
        representatives=int(settings.get("representatives", 3)),
        analyzer=analyzer,
    )


def _llm_from_settings(settings: dict):
    if "llm_endpoint" not in settings:
        return None, None
    config = LlmClientConfig(
        endpoint=settings["llm_endpoint"],
        model=settings.get("llm_model", "default"),
        api_key_env=settings.get("llm_api_key_env", "EVENTQA_LLM_API_KEY"),
        max_retries=int(settings.get("llm_max_retries", 3)),
        temperature=float(settings.get("llm_temperature", 0.0)),
        icl_path=settings.get("llm_icl_path"),
    )
    return LlmClient(config), config


def _default_store_path() -> str:
    return str(resources.files("eventqa").joinpath("data", "fixture_demo.jsonl"))


def _load_bundle_cfg(store_path, settings):
    store = ingest.load_events(store_path)
    gazetteer, expansion = ingest.sidecar_tables(store_path)
    retrieval = _retrieval_from_settings(settings, expansion)
    if retrieval.analyzer is None and expansion is not None:
        retrieval.analyzer = QueryAnalyzer(expansions=expansion)
    extractor = DefaultExtractor(gazetteer) if gazetteer is not None else DefaultExtractor()
    return store, retrieval, extractor


def _cmd_ask(args) -> int:
    settings = read_config(args.config) if args.config else {}
    store, retrieval, extractor = _load_bundle_cfg(args.store, settings)
    if args.persona not in store.personas():
        raise UserError(f"unknown persona {args.persona!r}; have {store.personas()}")
    persona_store = store.subset(args.persona)
    sources = frozenset(SourceKind)
    if args.sources:
        sources = frozenset(SourceKind.parse(s) for s in args.sources.split(","))
    cfg = EngineConfig(
        reference_date=date.fromisoformat(args.reference_date) if args.reference_date
        else date.fromisoformat(settings.get("reference_date", "2024-11-25")),
        enabled_sources=sources,
        retrieval=retrieval,
        extractor=extractor,
        index=build_index(persona_store),
    )
    client, client_cfg = _llm_from_settings(settings)
    try:
        tree = qud.plan_question(args.question, args.planner, client, client_cfg)
    except PlanningFailed as err:
        print(f"planning failed: {err}", file=sys.stderr)
        return 1
    try:
        answer, trace = execute(tree, persona_store, cfg)
    except ExecError as err:
        print(f"execution failed: {err}", file=sys.stderr)
        if args.trace and err.trace is not None:
            json.dump(err.trace.to_doc(), sys.stdout, indent=2)
            print()
        return 2
    print(render_answer(answer))
    if args.trace:
        json.dump(trace.to_doc(), sys.stdout, indent=2)
        print()
    return 0


def _cmd_plan(args) -> int:
    settings = read_config(args.config) if args.config else {}
    client, client_cfg = _llm_from_settings(settings)
    try:
        tree = qud.plan_question(args.question, args.planner, client, client_cfg)
    except PlanningFailed as err:
        print(f"planning failed: {err}", file=sys.stderr)
        return 1
    print(serialize_plan(tree))
    return 0


def _cmd_generate(args) -> int:
    profile = ingest.default_profile(args.name, total_events=args.events, seed=args.seed)
    dataset = ingest.generate_dataset(profile, seed=args.seed,
                                      duplicate_fraction=args.duplicate_fraction)
    paths = ingest.write_dataset(dataset, args.out, args.name)
    cases = ingest.generate_questions(dataset.store, profile, seed=args.seed, n=args.questions)
    cases_path = Path(args.out) / f"{args.name}.cases.jsonl"
    ingest.write_cases(cases, cases_path)
    paths["cases"] = cases_path
    for label, path in paths.items():
        print(f"{label}: {path}")
    return 0


def _cmd_eval(args) -> int:
    settings = read_config(args.config) if args.config else {}
    store, retrieval, extractor = _load_bundle_cfg(args.store, settings)
    cases = ingest.load_cases(args.cases)
    cfg = EngineConfig(retrieval=retrieval, extractor=extractor, index=build_index(store))
    client, client_cfg = _llm_from_settings(settings)

    def planner(question):
        return qud.plan_question(question, args.planner, client, client_cfg)

    outputs = evalkit.run_cases(store, cases, planner, cfg)
    report = evalkit.evaluate_run(cases, outputs)
    doc = report.to_doc()
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=2), encoding="utf-8")
        print(f"report: {args.report}")
    print(f"n={report.n} hit@1={report.hit_at_1} rlx-hit@1={report.rlx_hit_at_1}")
    return 0


def _cmd_serve(args) -> int:
    settings = read_config(args.config) if args.config else {}
    client, client_cfg = _llm_from_settings(settings)
    if args.store:
        deployment = deployment_from_files(args.store, client, client_cfg)
    else:
        deployment = demo_deployment()
        deployment.llm_client = client
        deployment.llm_config = client_cfg
    app = create_app(deployment)
    import uvicorn
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_events(args) -> int:
    store = ingest.load_events(args.store)
    if args.persona not in store.personas():
        raise UserError(f"unknown persona {args.persona!r}; have {store.personas()}")
    rows = sorted(store.subset(args.persona), key=lambda e: (e.scope.start, e.id), reverse=True)
    if args.query:
        from .events import verbalize
        needle = args.query.lower()
        rows = [e for e in rows if needle in verbalize(e)]
    start = (args.page - 1) * args.page_size
    for event in rows[start:start + args.page_size]:
        print(json.dumps(ingest.event_record(event), sort_keys=True))
    print(f"# total: {len(rows)}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eventqa",
                                     description="Question answering over personal event timelines")
    sub = parser.add_subparsers(dest="command")

    ask = sub.add_parser("ask", help="answer one question")
    ask.add_argument("--question", required=True)
    ask.add_argument("--persona", default="demo")
    ask.add_argument("--store", default=_default_store_path())
    ask.add_argument("--sources", help="comma-separated source kinds")
    ask.add_argument("--reference-date")
    ask.add_argument("--planner", default="auto", choices=("template", "llm", "auto"))
    ask.add_argument("--trace", action="store_true", help="print the trace JSON")
    ask.add_argument("--config")
    ask.set_defaults(fn=_cmd_ask)

    plan = sub.add_parser("plan", help="print the canonical plan without executing")
    plan.add_argument("question")
    plan.add_argument("--planner", default="auto", choices=("template", "llm", "auto"))
    plan.add_argument("--config")
    plan.set_defaults(fn=_cmd_plan)

    gen = sub.add_parser("generate", help="generate a synthetic persona dataset")
    gen.add_argument("--out", required=True)
    gen.add_argument("--name", default="persona")
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--events", type=int, default=2000)
    gen.add_argument("--questions", type=int, default=200)
    gen.add_argument("--duplicate-fraction", type=float, default=0.3)
    gen.set_defaults(fn=_cmd_generate)

    ev = sub.add_parser("eval", help="run the evaluation harness")
    ev.add_argument("--cases", required=True)
    ev.add_argument("--store", required=True)
    ev.add_argument("--planner", default="template", choices=("template", "llm", "auto"))
    ev.add_argument("--report")
    ev.add_argument("--config")
    ev.set_defaults(fn=_cmd_eval)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--store", nargs="*", help="persona event files (default: bundled demo)")
    serve.add_argument("--config")
    serve.set_defaults(fn=_cmd_serve)

    events = sub.add_parser("events", help="dump or search a store")
    events.add_argument("--persona", default="demo")
    events.add_argument("--store", default=_default_store_path())
    events.add_argument("--query")
    events.add_argument("--page", type=int, default=1)
    events.add_argument("--page-size", type=int, default=20)
    events.set_defaults(fn=_cmd_events)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_err:
        return 0 if exit_err.code in (0, None) else 1
    if not getattr(args, "fn", None):
        parser.print_help()
        return 1
    try:
        return args.fn(args)
    except (UserError, ingest.ParseError, PlanError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ingest.TemplateUnsatisfiable as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # internal
        print(f"internal error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
