"""Operator-tree execution over an event store.

Evaluation is bottom-up and deterministic. Predicates use three-valued
logic: comparisons against Null are unknown, and FILTER keeps an item only
when its predicate is definitely true. Every node leaves a TraceNode behind;
on failure the partial trace is attached to the raised ExecError.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Optional, Tuple

from .events import EventStore, SourceKind, coerce_temporal, format_value, value_compare
from .extract import DefaultExtractor, extract as run_extract
from .plan_dsl import (APPLY, EXTRACT, FILTER, GROUP_BY, JOIN, MAP, RETRIEVE, SUB, UNNEST,
                       Attr, Call, Expr, Lit, OperatorTree, RefDate)
from .results import ResultItem, canonical_event
from .retrieve import RetrievalConfig, SparseIndex, build_index, retrieve as run_retrieve


class ExecError(Exception):
    """Execution failure at one plan node; carries the partial trace."""

    def __init__(self, cause: str, message: str, node_id: Optional[str] = None):
        self.cause = cause
        self.node_id = node_id
        self.message = message
        self.trace = None
        super().__init__(f"{cause} at node {node_id or '?'}: {message}")


TYPE_MISMATCH = "type_mismatch"
UNKNOWN_FUNCTION = "unknown_function"
AGGREGATE_ON_NON_NUMERIC = "aggregate_on_non_numeric"
INVALID_REFERENCE = "invalid_reference"


class _UnknownType:
    __slots__ = ()

    def __repr__(self):
        return "UNKNOWN"


UNKNOWN = _UnknownType()


@dataclass(frozen=True)
class Answer:
    kind: str  # "scalar" | "items" | "empty"
    value: object = None
    items: Tuple[ResultItem, ...] = ()

    @classmethod
    def scalar(cls, value) -> "Answer":
        return cls("scalar", value=value)

    @classmethod
    def item_list(cls, items) -> "Answer":
        items = tuple(items)
        return cls("items", items=items) if items else cls.empty()

    @classmethod
    def empty(cls) -> "Answer":
        return cls("empty")


def _item_summary(item: ResultItem) -> str:
    if item.group_keys:
        return ", ".join(format_value(item.attrs.get(k)) for k in item.group_keys)
    if not item.events:
        return ", ".join(f"{k}={format_value(v)}" for k, v in sorted(item.attrs.items()))
    event = canonical_event(item.events)
    text = f"{event.id}: {event.source.value} {event.scope.start.strftime('%Y-%m-%dT%H:%M')}"
    if len(item.events) > 1:
        text += f" (+{len(item.events) - 1} linked)"
    return text


def render_answer(answer: Answer) -> str:
    """Display string consumed by the metrics and the UI."""
    if answer.kind == "scalar":
        return format_value(answer.value)
    if answer.kind == "items":
        return "; ".join(_item_summary(item) for item in answer.items)
    return "no answer"


@dataclass
class TraceNode:
    id: str
    op: str
    sub_question: Optional[str] = None
    n_in: list = field(default_factory=list)
    n_out: int = 0
    preview: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)
    elapsed_ms: float = 0.0
    children: list = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "op": self.op,
            "sub_question": self.sub_question,
            "n_in": list(self.n_in),
            "n_out": self.n_out,
            "preview": self.preview,
            "detail": self.detail,
            "elapsed_ms": round(self.elapsed_ms, 3),
            "children": [c.to_doc() for c in self.children],
        }


Trace = TraceNode


def item_doc(item: ResultItem) -> dict:
    return {
        "events": [e.id for e in item.events],
        "attrs": {k: (None if v is None else format_value(v)) for k, v in item.attrs.items()},
        "n_members": len(item.members) if item.members is not None else None,
    }


@dataclass
class EngineConfig:
    reference_date: date = date(2024, 11, 25)
    enabled_sources: frozenset = frozenset(SourceKind)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    extractor: object = field(default_factory=DefaultExtractor)
    preview: int = 5
    index: Optional[SparseIndex] = None

    def __post_init__(self):
        if not self.enabled_sources:
            raise ValueError("enabled_sources must be nonempty")


# --- expression evaluation ----------------------------------------------------


def _lookup(scope, attr: Attr):
    if isinstance(scope, tuple):  # JOIN predicate: (left, right)
        if attr.side == "left":
            return scope[0].lookup(attr.name)
        if attr.side == "right":
            return scope[1].lookup(attr.name)
        raise ExecError(INVALID_REFERENCE, f"JOIN predicates must use left./right., got {attr.name!r}")
    if attr.side is not None:
        raise ExecError(INVALID_REFERENCE, f"{attr.side}.{attr.name} outside a JOIN predicate")
    if attr.name == "group":
        return list(scope.members) if scope.members is not None else None
    return scope.lookup(attr.name)


def _to_bool3(value):
    if value is UNKNOWN or value is None:
        return UNKNOWN
    if isinstance(value, bool):
        return value
    raise ExecError(TYPE_MISMATCH, f"boolean expected, got {format_value(value)!r}")


def _compare(fn: str, a, b):
    if a is UNKNOWN or b is UNKNOWN:
        return UNKNOWN
    if a is None or b is None:
        return UNKNOWN
    order = value_compare(a, b)
    if order is None:
        raise ExecError(TYPE_MISMATCH, f"cannot compare {format_value(a)!r} with {format_value(b)!r}")
    return {"eq": order == 0, "ne": order != 0, "lt": order < 0,
            "le": order <= 0, "gt": order > 0, "ge": order >= 0}[fn]


def _arith(fn: str, a, b):
    if a is UNKNOWN or b is UNKNOWN or a is None or b is None:
        return None
    num = lambda v: isinstance(v, (int, float)) and not isinstance(v, bool)
    temporal = lambda v: isinstance(v, (date, datetime))
    dur = lambda v: isinstance(v, timedelta)
    if num(a) and num(b):
        if fn == "+":
            return a + b
        if fn == "-":
            return a - b
        if fn == "*":
            return a * b
        if b == 0:
            raise ExecError(TYPE_MISMATCH, "division by zero")
        return a / b
    if fn == "-" and temporal(a) and temporal(b):
        return coerce_temporal(a) - coerce_temporal(b)
    if fn == "+" and temporal(a) and dur(b):
        return coerce_temporal(a) + b
    if fn == "-" and temporal(a) and dur(b):
        return coerce_temporal(a) - b
    if fn in ("+", "-") and dur(a) and dur(b):
        return a + b if fn == "+" else a - b
    raise ExecError(TYPE_MISMATCH, f"{fn} not defined on {format_value(a)!r}, {format_value(b)!r}")


def eval_expr(expr: Expr, scope, reference_date: Optional[date] = None):
    """Evaluates an expression in an item or join-pair scope.

    Returns a Value or UNKNOWN. and/or short-circuit left-to-right over
    three-valued logic; everything else is strict.
    """
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, RefDate):
        return reference_date if reference_date is not None else date(2024, 11, 25)
    if isinstance(expr, Attr):
        return _lookup(scope, expr)
    if not isinstance(expr, Call):
        raise ExecError(UNKNOWN_FUNCTION, f"bad expression node {expr!r}")
    fn = expr.fn
    if fn in ("and", "or"):
        saw_unknown = False
        for arg in expr.args:
            value = _to_bool3(eval_expr(arg, scope, reference_date))
            if value is UNKNOWN:
                saw_unknown = True
            elif value is (fn == "or"):
                return fn == "or"
        return UNKNOWN if saw_unknown else (fn != "or")
    args = [eval_expr(arg, scope, reference_date) for arg in expr.args]
    if fn == "not":
        value = _to_bool3(args[0])
        return UNKNOWN if value is UNKNOWN else not value
    if fn in ("eq", "ne", "lt", "le", "gt", "ge"):
        return _compare(fn, args[0], args[1])
    if fn == "contains":
        a, b = args
        if a is None or b is None or a is UNKNOWN or b is UNKNOWN:
            return UNKNOWN
        if not isinstance(a, str) or not isinstance(b, str):
            raise ExecError(TYPE_MISMATCH, "contains expects strings")
        return b.casefold() in a.casefold()
    if fn == "same_day":
        a, b = args
        if a is None or b is None or a is UNKNOWN or b is UNKNOWN:
            return UNKNOWN
        ta, tb = coerce_temporal(a), coerce_temporal(b)
        if ta is None or tb is None:
            raise ExecError(TYPE_MISMATCH, "same_day expects dates or datetimes")
        return ta.date() == tb.date()
    if fn == "within":
        a, b, d = args
        if a is None or b is None or d is None or UNKNOWN in (a, b, d):
            return UNKNOWN
        ta, tb = coerce_temporal(a), coerce_temporal(b)
        if ta is None or tb is None or not isinstance(d, timedelta):
            raise ExecError(TYPE_MISMATCH, "within expects two temporals and a duration")
        return abs(ta - tb) <= d
    if fn in ("year", "month", "date"):
        value = args[0]
        if value is None or value is UNKNOWN:
            return None
        t = coerce_temporal(value)
        if t is None:
            raise ExecError(TYPE_MISMATCH, f"{fn}() expects a date or datetime")
        if fn == "year":
            return t.year
        if fn == "month":
            return t.month
        return t.date()
    if fn == "len":
        value = args[0]
        if value is None or value is UNKNOWN:
            return None
        if isinstance(value, (list, tuple, str)):
            return len(value)
        raise ExecError(TYPE_MISMATCH, "len() expects a list or string")
    if fn in ("+", "-", "*", "/"):
        return _arith(fn, args[0], args[1])
    raise ExecError(UNKNOWN_FUNCTION, f"unknown function {fn!r}")


# --- operator semantics -------------------------------------------------------


def eval_filter(items, predicate: Expr, reference_date: Optional[date] = None) -> list:
    """Keeps items whose predicate is definitely true; unknown counts as false."""
    return [item for item in items
            if eval_expr(predicate, item, reference_date) is True]


def eval_join(left, right, predicate: Expr, reference_date: Optional[date] = None) -> list:
    """Nested-loop join ordered by (left index, right index). Colliding
    attribute keys are kept as l.<key> / r.<key>."""
    out = []
    for litem in left:
        for ritem in right:
            if eval_expr(predicate, (litem, ritem), reference_date) is not True:
                continue
            lattrs, rattrs = litem.effective_attrs(), ritem.effective_attrs()
            attrs = {}
            for key, value in lattrs.items():
                if key in rattrs:
                    attrs[f"l.{key}"] = value
                    attrs[f"r.{key}"] = rattrs[key]
                else:
                    attrs[key] = value
            for key, value in rattrs.items():
                if key not in lattrs:
                    attrs[key] = value
            out.append(ResultItem(events=litem.events + ritem.events, attrs=attrs))
    return out


def _group_key_part(value):
    if value is None:
        return ("null",)
    if isinstance(value, bool):
        return ("bool", value)
    if isinstance(value, (int, float)):
        return ("num", float(value))
    if isinstance(value, (datetime, date)):
        return ("time", coerce_temporal(value))
    if isinstance(value, timedelta):
        return ("dur", value)
    if isinstance(value, str):
        return ("str", value.casefold())
    if isinstance(value, (list, tuple)):
        return ("list", tuple(_group_key_part(v) for v in value))
    return ("other", repr(value))


def eval_group_by(items, keys) -> list:
    """One output item per distinct key tuple (Null is groupable); groups
    ordered by first occurrence, members keep input order."""
    order = []
    buckets = {}
    for item in items:
        values = tuple(item.lookup(k) for k in keys)
        gkey = tuple(_group_key_part(v) for v in values)
        if gkey not in buckets:
            buckets[gkey] = (values, [])
            order.append(gkey)
        buckets[gkey][1].append(item)
    out = []
    for gkey in order:
        values, members = buckets[gkey]
        out.append(ResultItem(attrs=dict(zip(keys, values)), members=tuple(members),
                              group_keys=tuple(keys)))
    return out


def eval_unnest(items) -> list:
    """Replaces group items by their members; group attrs are copied onto
    each member with member attrs winning collisions."""
    out = []
    for item in items:
        if item.members is None:
            out.append(item)
            continue
        for member in item.members:
            attrs = dict(item.attrs)
            attrs.update(member.attrs)
            out.append(ResultItem(events=member.events, attrs=attrs, members=member.members,
                                  group_keys=member.group_keys))
    return out


def eval_map(items, assignments, reference_date: Optional[date] = None) -> list:
    """Evaluates assignments left-to-right per item; later assignments see
    earlier ones. Unknown results are stored as Null."""
    out = []
    for item in items:
        attrs = dict(item.attrs)
        staged = ResultItem(events=item.events, attrs=attrs, members=item.members,
                            group_keys=item.group_keys)
        for key, expr in assignments:
            value = eval_expr(expr, staged, reference_date)
            attrs[key] = None if value is UNKNOWN else value
        out.append(staged)
    return out


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _distinct_key(value):
    return _group_key_part(value)


def eval_apply(items, fn: str, key: Optional[str] = None) -> Answer:
    """len -> item count; distinct <key> -> count of distinct non-Null values."""
    if fn == "len":
        return Answer.scalar(len(items))
    if fn == "distinct":
        seen = {_distinct_key(v) for item in items if (v := item.lookup(key)) is not None}
        return Answer.scalar(len(seen))
    raise ExecError(UNKNOWN_FUNCTION, f"APPLY function {fn!r}")


def eval_aggregate(kind: str, items, key: str) -> Answer:
    """Null values are skipped. SUM of nothing is 0; AVG/MAX/MIN of nothing
    is the empty answer; ARGMAX/ARGMIN return every tied winner ordered by
    earliest temporal anchor."""
    values = [(item, item.lookup(key)) for item in items]
    values = [(item, v) for item, v in values if v is not None]
    if kind in ("SUM", "AVG"):
        bad = next((v for _, v in values if not _is_number(v)), None)
        if bad is not None:
            raise ExecError(AGGREGATE_ON_NON_NUMERIC, f"{kind} over non-numeric {format_value(bad)!r}")
        nums = [v for _, v in values]
        if kind == "SUM":
            return Answer.scalar(sum(nums) if nums else 0)
        if not nums:
            return Answer.empty()
        return Answer.scalar(sum(nums) / len(nums))
    if kind in ("MAX", "MIN"):
        if not values:
            return Answer.empty()
        best = values[0][1]
        for _, v in values[1:]:
            order = value_compare(v, best)
            if order is None:
                raise ExecError(TYPE_MISMATCH, f"{kind} over mixed value families")
            if (kind == "MAX" and order > 0) or (kind == "MIN" and order < 0):
                best = v
        return Answer.scalar(best)
    if kind in ("ARGMAX", "ARGMIN"):
        if not values:
            return Answer.empty()
        best = values[0][1]
        for _, v in values[1:]:
            order = value_compare(v, best)
            if order is None:
                raise ExecError(TYPE_MISMATCH, f"{kind} over mixed value families")
            if (kind == "ARGMAX" and order > 0) or (kind == "ARGMIN" and order < 0):
                best = v
        winners = [(item, v) for item, v in values if value_compare(v, best) == 0]
        anchor = datetime.max
        ordered = sorted(enumerate(winners),
                         key=lambda pair: (pair[1][0].start_anchor() or anchor, pair[0]))
        return Answer.item_list([item for _, (item, _) in ordered])
    raise ExecError(UNKNOWN_FUNCTION, f"aggregate {kind!r}")


def _scalar_items(answer: Answer, key: str) -> list:
    """Items-view of a scalar node so aggregates stay composable mid-plan."""
    if answer.kind == "empty":
        return []
    return [ResultItem(attrs={key: answer.value})]


# --- execution -----------------------------------------------------------------


def execute(tree: OperatorTree, store: EventStore, cfg: Optional[EngineConfig] = None):
    """Post-order evaluation; returns (Answer, Trace). On failure raises
    ExecError with the partial trace attached."""
    cfg = cfg or EngineConfig()
    index = cfg.index if cfg.index is not None else build_index(store)
    root_traces = []
    try:
        items, answer, trace = _eval_node(tree, "1", store, index, cfg, root_traces)
    except ExecError as err:
        err.trace = root_traces[0] if root_traces else None
        raise
    if answer is None:
        answer = Answer.item_list(items)
    return answer, trace


def _eval_node(node, path, store, index, cfg, siblings):
    tnode = TraceNode(id=path, op=node.op, sub_question=node.sub_question)
    siblings.append(tnode)
    started = time.perf_counter()
    child_items = []
    child_answers = []
    for i, child in enumerate(node.children):
        items_i, answer_i, _ = _eval_node(child, f"{path}.{i + 1}", store, index, cfg, tnode.children)
        child_items.append(items_i)
        child_answers.append(answer_i)
    tnode.n_in = [len(ci) for ci in child_items]
    try:
        items, answer, detail = _apply_op(node, child_items, store, index, cfg)
    except ExecError as err:
        if err.node_id is None:
            err.node_id = path
            err.args = (f"{err.cause} at node {path}: {err.message}",)
        tnode.detail["error"] = {"cause": err.cause, "message": err.message}
        tnode.elapsed_ms = (time.perf_counter() - started) * 1000.0
        raise
    tnode.n_out = len(items)
    tnode.preview = [item_doc(item) for item in items[:cfg.preview]]
    if detail:
        tnode.detail = detail
    tnode.elapsed_ms = (time.perf_counter() - started) * 1000.0
    return items, answer, tnode


def _apply_op(node, child_items, store, index, cfg):
    op = node.op
    if op == RETRIEVE:
        items, detail = run_retrieve(node.query, store, index, cfg.retrieval, cfg.enabled_sources)
        return items, None, detail
    if op == SUB:
        raise ExecError(INVALID_REFERENCE, f"unresolved placeholder {node.query!r}")
    if op == EXTRACT:
        items, detail = run_extract(child_items[0], node.keys, cfg.extractor)
        return items, None, {"extracted": detail}
    if op == FILTER:
        return eval_filter(child_items[0], node.predicate, cfg.reference_date), None, {}
    if op == JOIN:
        return eval_join(child_items[0], child_items[1], node.predicate, cfg.reference_date), None, {}
    if op == GROUP_BY:
        return eval_group_by(child_items[0], node.keys), None, {}
    if op == UNNEST:
        return eval_unnest(child_items[0]), None, {}
    if op == MAP:
        return eval_map(child_items[0], node.assignments, cfg.reference_date), None, {}
    if op == APPLY:
        answer = eval_apply(child_items[0], node.fn, node.key)
        return _scalar_items(answer, "value"), answer, {"function": node.fn}
    answer = eval_aggregate(op, child_items[0], node.key)
    if answer.kind == "items":
        return list(answer.items), answer, {"key": node.key}
    return _scalar_items(answer, node.key), answer, {"key": node.key}
