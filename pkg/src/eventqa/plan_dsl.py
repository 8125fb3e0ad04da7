"""Execution-plan DSL: grammar, parser, canonical serializer and validator.

Plans are s-expressions, one operator per node:

    (APPLY
      (JOIN
        (EXTRACT (RETRIEVE "instances of eating Italian food") [date, start_time])
        (EXTRACT (RETRIEVE "workout events") [date, end_time])
        (and (same_day left.date right.date) (gt left.start_time right.end_time)))
      len)

An optional sub-question annotation may follow the operator name:
(RETRIEVE #"workout events?" "workout events"). Comments run from ';' to end
of line. Typed literals: d"2024-11-25" (date), dt"2024-03-01T19:00"
(datetime), dur"90m" (duration in minutes).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Optional, Tuple, Union

# --- errors -------------------------------------------------------------


class PlanError(Exception):
    """Base for plan parse/shape errors, with a source position when known."""

    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None):
        self.message = message
        self.line = line
        self.col = col
        where = f" at {line}:{col}" if line is not None else ""
        super().__init__(f"{message}{where}")


class PlanSyntaxError(PlanError):
    pass


class UnknownOperatorError(PlanError):
    pass


class ArityError(PlanError):
    pass


# --- expression AST -------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: object  # None | bool | int | float | str | date | datetime | timedelta


@dataclass(frozen=True)
class Attr:
    name: str
    side: Optional[str] = None  # "left" / "right" inside JOIN predicates


@dataclass(frozen=True)
class RefDate:
    pass


@dataclass(frozen=True)
class Call:
    fn: str
    args: Tuple["Expr", ...]


Expr = Union[Lit, Attr, RefDate, Call]

# function name -> arity (None = variadic, at least two)
EXPR_FUNCTIONS = {
    "eq": 2, "ne": 2, "lt": 2, "le": 2, "gt": 2, "ge": 2,
    "and": None, "or": None, "not": 1,
    "contains": 2, "same_day": 2, "within": 3,
    "year": 1, "month": 1, "date": 1, "len": 1,
    "+": 2, "-": 2, "*": 2, "/": 2,
}

COMPARISONS = {"eq", "ne", "lt", "le", "gt", "ge"}

# --- operator AST ----------------------------------------------------------

RETRIEVE = "RETRIEVE"
EXTRACT = "EXTRACT"
FILTER = "FILTER"
JOIN = "JOIN"
GROUP_BY = "GROUP_BY"
UNNEST = "UNNEST"
MAP = "MAP"
APPLY = "APPLY"
AGGREGATES = ("SUM", "AVG", "MAX", "MIN", "ARGMAX", "ARGMIN")
SUB = "SUB"  # placeholder leaf used during incremental decomposition

OPERATORS = {RETRIEVE, EXTRACT, FILTER, JOIN, GROUP_BY, UNNEST, MAP, APPLY, *AGGREGATES}

_ARITY = {RETRIEVE: 0, SUB: 0, JOIN: 2}  # all other operators take one child

_KEY_RE = re.compile(r"^[a-z_][a-z0-9_]*$")


@dataclass(frozen=True)
class OperatorNode:
    op: str
    children: Tuple["OperatorNode", ...] = ()
    query: Optional[str] = None                      # RETRIEVE / SUB
    keys: Tuple[str, ...] = ()                       # EXTRACT / GROUP_BY
    predicate: Optional[Expr] = None                 # FILTER / JOIN
    assignments: Tuple[Tuple[str, Expr], ...] = ()   # MAP
    fn: Optional[str] = None                         # APPLY: len | distinct
    key: Optional[str] = None                        # aggregates, APPLY distinct
    sub_question: Optional[str] = None

    def __post_init__(self):
        if self.op not in OPERATORS and self.op != SUB:
            raise UnknownOperatorError(f"unknown operator {self.op!r}")
        want = _ARITY.get(self.op, 1)
        if len(self.children) != want:
            raise ArityError(f"{self.op} takes {want} child node(s), got {len(self.children)}")
        if self.op in (RETRIEVE, SUB) and not isinstance(self.query, str):
            raise ArityError(f"{self.op} requires a query string")
        if self.op in (EXTRACT, GROUP_BY) and not self.keys:
            raise ArityError(f"{self.op} requires a non-empty key list")
        if self.op == EXTRACT:
            # key order is not semantic for EXTRACT; canonicalize
            object.__setattr__(self, "keys", tuple(sorted(set(self.keys))))
        if self.op in (FILTER, JOIN) and self.predicate is None:
            raise ArityError(f"{self.op} requires a predicate expression")
        if self.op == MAP and not self.assignments:
            raise ArityError("MAP requires at least one assignment")
        if self.op == APPLY:
            if self.fn not in ("len", "distinct"):
                raise ArityError(f"APPLY function must be len or distinct, got {self.fn!r}")
            if self.fn == "distinct" and not self.key:
                raise ArityError("APPLY distinct requires an attribute key")
        if self.op in AGGREGATES and not self.key:
            raise ArityError(f"{self.op} requires an attribute key")

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


OperatorTree = OperatorNode

# --- tokenizer --------------------------------------------------------------

_PUNCT = {"(": "LPAREN", ")": "RPAREN", "[": "LBRACKET", "]": "RBRACKET", ",": "COMMA", "#": "HASH"}
_NAME_START = re.compile(r"[A-Za-z_]")
_NAME_CHAR = re.compile(r"[A-Za-z0-9_.]")


@dataclass
class _Token:
    kind: str   # LPAREN RPAREN LBRACKET RBRACKET COMMA HASH ASSIGN NAME NUMBER STRING DATE DATETIME DURATION SYMBOL EOF
    value: object
    line: int
    col: int


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int = 1):
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _error(self, message: str):
        raise PlanSyntaxError(message, self.line, self.col)

    def _string_body(self) -> str:
        # caller consumed the opening quote
        out = []
        while True:
            if self.pos >= len(self.text):
                self._error("unterminated string")
            ch = self.text[self.pos]
            if ch == "\\":
                if self.pos + 1 >= len(self.text):
                    self._error("unterminated escape")
                nxt = self.text[self.pos + 1]
                out.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(nxt))
                if out[-1] is None:
                    self._error(f"bad escape \\{nxt}")
                self._advance(2)
            elif ch == '"':
                self._advance()
                return "".join(out)
            else:
                out.append(ch)
                self._advance()

    def tokens(self):
        text = self.text
        while True:
            while self.pos < len(text) and text[self.pos] in " \t\r\n":
                self._advance()
            if self.pos < len(text) and text[self.pos] == ";":
                while self.pos < len(text) and text[self.pos] != "\n":
                    self._advance()
                continue
            if self.pos >= len(text):
                yield _Token("EOF", None, self.line, self.col)
                return
            line, col = self.line, self.col
            ch = text[self.pos]
            if ch in _PUNCT:
                self._advance()
                yield _Token(_PUNCT[ch], ch, line, col)
            elif ch == ":" and text[self.pos:self.pos + 2] == ":=":
                self._advance(2)
                yield _Token("ASSIGN", ":=", line, col)
            elif ch == '"':
                self._advance()
                yield _Token("STRING", self._string_body(), line, col)
            elif ch.isdigit() or (ch == "-" and self.pos + 1 < len(text) and text[self.pos + 1].isdigit()):
                start = self.pos
                self._advance()
                while self.pos < len(text) and (text[self.pos].isdigit() or text[self.pos] in ".eE"
                                                or (text[self.pos] in "+-" and text[self.pos - 1] in "eE")):
                    self._advance()
                raw = text[start:self.pos]
                try:
                    value = int(raw) if re.fullmatch(r"-?\d+", raw) else float(raw)
                except ValueError:
                    raise PlanSyntaxError(f"invalid number {raw!r}", line, col)
                yield _Token("NUMBER", value, line, col)
            elif ch in "+-*/":
                self._advance()
                yield _Token("SYMBOL", ch, line, col)
            elif _NAME_START.match(ch):
                start = self.pos
                self._advance()
                while self.pos < len(text) and _NAME_CHAR.match(text[self.pos]):
                    self._advance()
                name = text[start:self.pos]
                if name in ("d", "dt", "dur") and self.pos < len(text) and text[self.pos] == '"':
                    self._advance()
                    body = self._string_body()
                    yield self._typed_literal(name, body, line, col)
                else:
                    yield _Token("NAME", name, line, col)
            else:
                self._error(f"unexpected character {ch!r}")

    def _typed_literal(self, prefix: str, body: str, line: int, col: int) -> _Token:
        try:
            if prefix == "d":
                return _Token("DATE", date.fromisoformat(body), line, col)
            if prefix == "dt":
                value = datetime.strptime(body, "%Y-%m-%dT%H:%M")
                return _Token("DATETIME", value, line, col)
            m = re.fullmatch(r"(\d+)m", body)
            if not m:
                raise ValueError(body)
            return _Token("DURATION", timedelta(minutes=int(m.group(1))), line, col)
        except ValueError:
            raise PlanSyntaxError(f"invalid {prefix!r} literal {body!r}", line, col)


# --- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, allow_placeholders: bool = False):
        self._stream = _Lexer(text).tokens()
        self._peeked = None
        self.allow_placeholders = allow_placeholders

    def _next(self) -> _Token:
        if self._peeked is not None:
            tok, self._peeked = self._peeked, None
            return tok
        return next(self._stream)

    def _peek(self) -> _Token:
        if self._peeked is None:
            self._peeked = next(self._stream)
        return self._peeked

    def _expect(self, kind: str, what: str) -> _Token:
        tok = self._next()
        if tok.kind != kind:
            raise PlanSyntaxError(f"expected {what}, found {tok.value!r}" if tok.kind != "EOF"
                                  else f"expected {what}, found end of input", tok.line, tok.col)
        return tok

    def parse(self) -> OperatorNode:
        node = self._node()
        tail = self._next()
        if tail.kind != "EOF":
            raise PlanSyntaxError(f"trailing input {tail.value!r}", tail.line, tail.col)
        return node

    def _node(self) -> OperatorNode:
        self._expect("LPAREN", "'('")
        tok = self._expect("NAME", "operator name")
        op = tok.value
        if op not in OPERATORS and not (self.allow_placeholders and op == SUB):
            raise UnknownOperatorError(f"unknown operator {op!r}", tok.line, tok.col)
        sub_question = None
        if self._peek().kind == "HASH":
            self._next()
            sub_question = self._expect("STRING", "annotation string").value
        try:
            node = self._body(op, sub_question, tok)
        except (ArityError, UnknownOperatorError) as err:
            if err.line is None:
                raise type(err)(err.message, tok.line, tok.col) from None
            raise
        self._expect("RPAREN", "')'")
        return node

    def _body(self, op: str, sub_question: Optional[str], tok: _Token) -> OperatorNode:
        common = {"sub_question": sub_question}
        if op in (RETRIEVE, SUB):
            query = self._expect("STRING", "query string").value
            return OperatorNode(op, query=query, **common)
        children = [self._node()]
        if op == EXTRACT:
            return OperatorNode(op, tuple(children), keys=self._key_list(), **common)
        if op == GROUP_BY:
            return OperatorNode(op, tuple(children), keys=self._key_list(), **common)
        if op == FILTER:
            return OperatorNode(op, tuple(children), predicate=self._expr(), **common)
        if op == JOIN:
            if self._peek().kind != "LPAREN":
                raise ArityError("JOIN takes 2 child node(s), got 1", tok.line, tok.col)
            children.append(self._node())
            return OperatorNode(op, tuple(children), predicate=self._expr(), **common)
        if op == UNNEST:
            return OperatorNode(op, tuple(children), **common)
        if op == MAP:
            return OperatorNode(op, tuple(children), assignments=self._assignments(), **common)
        if op == APPLY:
            fn = self._expect("NAME", "function name (len or distinct)").value
            key = None
            if fn == "distinct":
                key = self._key(self._expect("NAME", "attribute key"))
            return OperatorNode(op, tuple(children), fn=fn, key=key, **common)
        # aggregates
        key = self._key(self._expect("NAME", "attribute key"))
        return OperatorNode(op, tuple(children), key=key, **common)

    def _key(self, tok: _Token) -> str:
        if not _KEY_RE.match(tok.value):
            raise PlanSyntaxError(f"invalid attribute key {tok.value!r}", tok.line, tok.col)
        return tok.value

    def _key_list(self) -> Tuple[str, ...]:
        self._expect("LBRACKET", "'['")
        keys = [self._key(self._expect("NAME", "attribute key"))]
        while True:
            tok = self._peek()
            if tok.kind == "COMMA":
                self._next()
                keys.append(self._key(self._expect("NAME", "attribute key")))
            elif tok.kind == "NAME":
                keys.append(self._key(self._next()))
            else:
                break
        self._expect("RBRACKET", "']'")
        return tuple(keys)

    def _assignments(self) -> Tuple[Tuple[str, Expr], ...]:
        self._expect("LBRACKET", "'['")
        out = []
        while True:
            key = self._key(self._expect("NAME", "attribute key"))
            self._expect("ASSIGN", "':='")
            out.append((key, self._expr()))
            if self._peek().kind == "COMMA":
                self._next()
                continue
            break
        self._expect("RBRACKET", "']'")
        return tuple(out)

    def _expr(self) -> Expr:
        tok = self._next()
        if tok.kind == "NUMBER":
            return Lit(tok.value)
        if tok.kind == "STRING":
            return Lit(tok.value)
        if tok.kind in ("DATE", "DATETIME", "DURATION"):
            return Lit(tok.value)
        if tok.kind == "NAME":
            return self._name_expr(tok)
        if tok.kind == "LPAREN":
            head = self._next()
            if head.kind not in ("NAME", "SYMBOL"):
                raise PlanSyntaxError(f"expected function name, found {head.value!r}", head.line, head.col)
            fn = head.value
            if fn not in EXPR_FUNCTIONS:
                raise PlanSyntaxError(f"unknown function {fn!r}", head.line, head.col)
            args = []
            while self._peek().kind != "RPAREN":
                if self._peek().kind == "EOF":
                    raise PlanSyntaxError("expected ')', found end of input", self._peek().line, self._peek().col)
                args.append(self._expr())
            self._next()
            want = EXPR_FUNCTIONS[fn]
            if want is None:
                if len(args) < 2:
                    raise ArityError(f"{fn} takes at least 2 arguments, got {len(args)}", head.line, head.col)
            elif len(args) != want:
                raise ArityError(f"{fn} takes {want} argument(s), got {len(args)}", head.line, head.col)
            return Call(fn, tuple(args))
        raise PlanSyntaxError(f"expected expression, found {tok.value!r}" if tok.kind != "EOF"
                              else "expected expression, found end of input", tok.line, tok.col)

    def _name_expr(self, tok: _Token) -> Expr:
        name = tok.value
        if name == "REF_DATE":
            return RefDate()
        if name == "true":
            return Lit(True)
        if name == "false":
            return Lit(False)
        if name == "null":
            return Lit(None)
        for side in ("left", "right"):
            prefix = side + "."
            if name.startswith(prefix):
                rest = name[len(prefix):]
                if not rest:
                    raise PlanSyntaxError(f"missing key after {prefix!r}", tok.line, tok.col)
                return Attr(rest, side)
        return Attr(name)


def parse_plan(text: str, allow_placeholders: bool = False) -> OperatorTree:
    """Parses plan text; raises PlanSyntaxError / ArityError / UnknownOperatorError
    with source positions."""
    return _Parser(text, allow_placeholders=allow_placeholders).parse()


# --- serializer -------------------------------------------------------------


def _escape(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{out}"'


def _lit_text(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, datetime):
        return f'dt"{value.strftime("%Y-%m-%dT%H:%M")}"'
    if isinstance(value, date):
        return f'd"{value.isoformat()}"'
    if isinstance(value, timedelta):
        return f'dur"{int(value.total_seconds() // 60)}m"'
    return _escape(str(value))


def expr_to_text(expr: Expr) -> str:
    if isinstance(expr, Lit):
        return _lit_text(expr.value)
    if isinstance(expr, RefDate):
        return "REF_DATE"
    if isinstance(expr, Attr):
        return f"{expr.side}.{expr.name}" if expr.side else expr.name
    return "(" + " ".join([expr.fn] + [expr_to_text(a) for a in expr.args]) + ")"


def serialize_plan(tree: OperatorTree) -> str:
    """Canonical text: one operator per line, children indented two spaces.

    parse_plan(serialize_plan(t)) is structurally equal to t.
    """
    lines = []
    _serialize(tree, 0, lines)
    return "\n".join(lines)


def _serialize(node: OperatorNode, depth: int, lines: list):
    pad = "  " * depth
    head = f"({node.op}"
    if node.sub_question is not None:
        head += f" #{_escape(node.sub_question)}"
    if node.op in (RETRIEVE, SUB):
        lines.append(f"{pad}{head} {_escape(node.query)})")
        return
    lines.append(pad + head)
    for child in node.children:
        _serialize(child, depth + 1, lines)
    arg_pad = "  " * (depth + 1)
    if node.op in (EXTRACT, GROUP_BY):
        lines.append(f"{arg_pad}[{', '.join(node.keys)}])")
    elif node.op in (FILTER, JOIN):
        lines.append(f"{arg_pad}{expr_to_text(node.predicate)})")
    elif node.op == MAP:
        body = ", ".join(f"{k} := {expr_to_text(e)}" for k, e in node.assignments)
        lines.append(f"{arg_pad}[{body}])")
    elif node.op == APPLY:
        fn = node.fn if node.fn != "distinct" else f"distinct {node.key}"
        lines.append(f"{arg_pad}{fn})")
    elif node.op in AGGREGATES:
        lines.append(f"{arg_pad}{node.key})")
    else:  # UNNEST
        lines[-1] += ")"


# --- validator --------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    path: str      # dotted node path, root = "1"


_LIT_FAMILIES = {bool: "bool", int: "number", float: "number", str: "string",
                 datetime: "temporal", date: "temporal", timedelta: "duration"}


def _lit_family(value) -> Optional[str]:
    if value is None:
        return None
    for typ in (bool, datetime):  # before their base classes int / date
        if isinstance(value, typ):
            return _LIT_FAMILIES[typ]
    return _LIT_FAMILIES.get(type(value))


def validate_plan(tree: OperatorTree) -> list:
    """Static checks; returns diagnostics (errors do not raise)."""
    out = []
    _validate(tree, "1", out)
    return out


def _provided_keys(node: OperatorNode) -> set:
    if node.op in (RETRIEVE, SUB):
        return set()
    child = _provided_keys(node.children[0]) if node.children else set()
    if node.op == EXTRACT:
        return child | set(node.keys)
    if node.op == MAP:
        return child | {k for k, _ in node.assignments}
    if node.op == GROUP_BY:
        return set(node.keys)
    if node.op == UNNEST:
        inner = node.children[0]
        if inner.op == GROUP_BY:
            return _provided_keys(inner.children[0]) | set(inner.keys)
        return child
    if node.op == JOIN:
        left, right = (_provided_keys(c) for c in node.children)
        both = left | right
        for k in left & right:
            both |= {f"l.{k}", f"r.{k}"}
        return both
    return child


def _has_group_by_below(node: OperatorNode) -> bool:
    return any(n.op == GROUP_BY for child in node.children for n in child.walk())


def _check_expr(expr: Expr, node: OperatorNode, path: str, out: list):
    if isinstance(expr, Attr):
        if expr.side and node.op != JOIN:
            out.append(Diagnostic("error", f"{expr.side}. reference outside JOIN predicate", path))
        if expr.name == "group" and expr.side is None and not _has_group_by_below(node):
            out.append(Diagnostic("error", "group reference without GROUP_BY below", path))
    elif isinstance(expr, Call):
        if expr.fn in COMPARISONS and len(expr.args) == 2:
            fams = [_lit_family(a.value) for a in expr.args if isinstance(a, Lit)]
            if len(fams) == 2 and None not in fams and fams[0] != fams[1]:
                out.append(Diagnostic("warning", f"comparison between {fams[0]} and {fams[1]} literals", path))
        for arg in expr.args:
            _check_expr(arg, node, path, out)


def _validate(node: OperatorNode, path: str, out: list):
    if node.predicate is not None:
        _check_expr(node.predicate, node, path, out)
    for _, expr in node.assignments:
        _check_expr(expr, node, path, out)
    if node.op in AGGREGATES or (node.op == APPLY and node.fn == "distinct"):
        provided = _provided_keys(node.children[0])
        if node.key not in provided:
            out.append(Diagnostic("warning", f"key {node.key!r} not provably provided upstream "
                                             "(raw event fields may still supply it)", path))
    for i, child in enumerate(node.children, start=1):
        _validate(child, f"{path}.{i}", out)
