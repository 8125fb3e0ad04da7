"""Answer normalization, Hit@1 / relaxed Hit@1, and the batch harness."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .engine import EngineConfig, ExecError, execute, render_answer
from .events import EventStore
from .qud import PlanningFailed

_NUMBER_RE = re.compile(r"^[+-]?\d+(\.\d+)?$")
_MONTH_RE = re.compile(r"^\d{4}-\d{2}$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class AlignmentError(Exception):
    pass


@dataclass(frozen=True)
class MetricsConfig:
    rho: float = 0.10  # relative tolerance for numeric answers

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must be in [0, 1)")


def normalize_answer(display: str):
    """Typed normal form: numbers parse to floats, ISO dates/months keep
    their text, everything else casefolds. A multi-item rendering compares
    by its first element (the @1 prediction)."""
    text = display.strip()
    if ";" in text:
        text = text.split(";", 1)[0].strip()
    text = text.casefold()
    if _NUMBER_RE.match(text):
        return ("number", float(text))
    if _MONTH_RE.match(text):
        return ("month", text)
    if _DATE_RE.match(text):
        return ("date", text)
    return ("text", text)


def hit_at_1(pred: str, gold: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gold))


def rlx_hit_at_1(pred: str, gold: str, rho: float = 0.10) -> int:
    """Numeric answers may deviate up to rho relative to gold, boundary
    inclusive; gold 0 still requires an exact 0. Non-numeric falls back to
    exact Hit@1."""
    p, g = normalize_answer(pred), normalize_answer(gold)
    if p[0] == "number" and g[0] == "number":
        if g[1] == 0:
            return int(p[1] == 0)
        return int(abs(p[1] - g[1]) <= rho * abs(g[1]))
    return hit_at_1(pred, gold)


@dataclass
class SystemOutput:
    question: str
    predicted: str
    trace: Optional[dict] = None
    error: Optional[str] = None


@dataclass
class EvalReport:
    n: int
    hit_at_1: Optional[float]
    rlx_hit_at_1: Optional[float]
    per_template: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_doc(self) -> dict:
        return {"n": self.n, "hit_at_1": self.hit_at_1, "rlx_hit_at_1": self.rlx_hit_at_1,
                "per_template": self.per_template, "failures": self.failures}


def evaluate_run(cases, outputs, rho: float = 0.10) -> EvalReport:
    """Scores aligned (case, output) pairs; misaligned questions abort."""
    if len(cases) != len(outputs):
        raise AlignmentError(f"{len(cases)} cases vs {len(outputs)} outputs")
    if not cases:
        return EvalReport(n=0, hit_at_1=None, rlx_hit_at_1=None)
    hits, rlxs = [], []
    per_template = {}
    failures = []
    for case, output in zip(cases, outputs):
        if output.question != case.question:
            raise AlignmentError(f"output question {output.question!r} != case {case.question!r}")
        gold = render_answer(case.answer)
        hit = hit_at_1(output.predicted, gold)
        rlx = rlx_hit_at_1(output.predicted, gold, rho)
        hits.append(hit)
        rlxs.append(rlx)
        bucket = per_template.setdefault(case.template_id, {"n": 0, "hit": 0, "rlx": 0})
        bucket["n"] += 1
        bucket["hit"] += hit
        bucket["rlx"] += rlx
        if not hit:
            failures.append({"question": case.question, "template": case.template_id,
                             "predicted": output.predicted, "gold": gold,
                             "error": output.error, "trace": output.trace})
    breakdown = {tid: {"n": b["n"], "hit_at_1": b["hit"] / b["n"], "rlx_hit_at_1": b["rlx"] / b["n"]}
                 for tid, b in per_template.items()}
    return EvalReport(n=len(cases), hit_at_1=sum(hits) / len(hits),
                      rlx_hit_at_1=sum(rlxs) / len(rlxs),
                      per_template=breakdown, failures=failures)


def run_cases(store: EventStore, cases, planner, cfg: Optional[EngineConfig] = None) -> list:
    """Executes each case through planner + engine; failures become outputs
    with an empty prediction and the partial trace kept for debugging."""
    cfg = cfg or EngineConfig()
    outputs = []
    for case in cases:
        try:
            tree = planner(case.question)
            if tree is None:
                raise PlanningFailed("planner returned no plan")
            answer, trace = execute(tree, store, cfg)
            outputs.append(SystemOutput(case.question, render_answer(answer), trace.to_doc()))
        except PlanningFailed as err:
            outputs.append(SystemOutput(case.question, "", None, f"planning: {err}"))
        except ExecError as err:
            trace_doc = err.trace.to_doc() if err.trace is not None else None
            outputs.append(SystemOutput(case.question, "", trace_doc, f"execution: {err}"))
    return outputs
