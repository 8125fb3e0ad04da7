"""Seeded random generators for valid plans and random operator inputs."""

from datetime import date, datetime, timedelta

from eventqa.events import Event, SourceKind, TemporalScope
from eventqa.plan_dsl import Attr, Call, Lit, OperatorNode, RefDate
from eventqa.results import ResultItem

KEYS = ("price", "qty", "color", "name", "score", "day_part", "x1")
QUERIES = (
    "workout events",
    "instances of eating Italian food",
    'query with "quotes" and \\backslash\\',
    "multi\nline\tquery",
    "café au lait ☕ unicode",
    "",
    "  padded  ",
)
STRINGS = ("red", "Blue", "yoga", 'say "hi"', "tab\there", "ünïcode")


def random_value(rng):
    roll = rng.randrange(8)
    if roll == 0:
        return rng.randint(-50, 50)
    if roll == 1:
        return round(rng.uniform(-100, 100), 3)
    if roll == 2:
        return rng.choice(STRINGS)
    if roll == 3:
        return rng.choice((True, False))
    if roll == 4:
        return None
    if roll == 5:
        return date(2024, rng.randint(1, 12), rng.randint(1, 28))
    if roll == 6:
        return datetime(2024, rng.randint(1, 12), rng.randint(1, 28),
                        rng.randint(0, 23), rng.randint(0, 59))
    return timedelta(minutes=rng.randint(1, 600))


def random_expr(rng, depth=0, join_scope=False):
    if depth >= 3 or rng.random() < 0.35:
        roll = rng.randrange(4)
        if roll == 0:
            return Lit(random_value(rng))
        if roll == 1 and join_scope:
            return Attr(rng.choice(KEYS), rng.choice(("left", "right")))
        if roll == 2:
            return RefDate()
        return Attr(rng.choice(KEYS))
    fn = rng.choice(("eq", "ne", "lt", "le", "gt", "ge", "and", "or", "not",
                     "contains", "same_day", "within", "year", "month", "date",
                     "len", "+", "-", "*", "/"))
    arity = {"not": 1, "year": 1, "month": 1, "date": 1, "len": 1, "within": 3}.get(fn)
    if arity is None:
        arity = rng.choice((2, 3)) if fn in ("and", "or") else 2
    args = tuple(random_expr(rng, depth + 1, join_scope) for _ in range(arity))
    return Call(fn, args)


def random_plan(rng, depth=0):
    if depth >= 4 or rng.random() < 0.3:
        node = OperatorNode("RETRIEVE", query=rng.choice(QUERIES))
    else:
        op = rng.choice(("EXTRACT", "FILTER", "JOIN", "GROUP_BY", "UNNEST", "MAP",
                         "APPLY", "SUM", "AVG", "MAX", "MIN", "ARGMAX", "ARGMIN"))
        child = random_plan(rng, depth + 1)
        if op == "EXTRACT":
            keys = tuple(rng.sample(KEYS, rng.randint(1, 3)))
            node = OperatorNode(op, (child,), keys=keys)
        elif op == "GROUP_BY":
            keys = tuple(rng.sample(KEYS, rng.randint(1, 2)))
            node = OperatorNode(op, (child,), keys=keys)
        elif op == "FILTER":
            node = OperatorNode(op, (child,), predicate=random_expr(rng))
        elif op == "JOIN":
            node = OperatorNode(op, (child, random_plan(rng, depth + 1)),
                                predicate=random_expr(rng, join_scope=True))
        elif op == "UNNEST":
            node = OperatorNode(op, (child,))
        elif op == "MAP":
            n = rng.randint(1, 3)
            assignments = tuple((rng.choice(KEYS), random_expr(rng)) for _ in range(n))
            node = OperatorNode(op, (child,), assignments=assignments)
        elif op == "APPLY":
            if rng.random() < 0.5:
                node = OperatorNode(op, (child,), fn="len")
            else:
                node = OperatorNode(op, (child,), fn="distinct", key=rng.choice(KEYS))
        else:
            node = OperatorNode(op, (child,), key=rng.choice(KEYS))
    if rng.random() < 0.25:
        from dataclasses import replace
        node = replace(node, sub_question=rng.choice(QUERIES))
    return node


_SOURCES = list(SourceKind)


def random_items(rng, max_items=8, persona="t", with_groups=False):
    """Random ResultItems with small attr maps and synthetic events."""
    items = []
    for i in range(rng.randint(0, max_items)):
        begin = datetime(2024, rng.randint(1, 12), rng.randint(1, 28),
                         rng.randint(0, 22), rng.randint(0, 59))
        event = Event(id=f"{persona}{i:03d}", persona=persona, source=rng.choice(_SOURCES),
                      scope=TemporalScope(begin, begin + timedelta(minutes=rng.randint(0, 90))),
                      fields={rng.choice(KEYS): random_value(rng) or 0},
                      text="synthetic")
        attrs = {}
        for key in rng.sample(KEYS, rng.randint(0, 3)):
            attrs[key] = random_value(rng)
        members = None
        if with_groups and rng.random() < 0.3:
            members = tuple(random_items(rng, 3, persona=f"{persona}m{i}"))
        items.append(ResultItem(events=(event,), attrs=attrs, members=members))
    return items
