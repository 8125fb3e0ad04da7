"""Unified event model: values, sources, temporal scopes, events and stores.

Every other module operates on these types. All of them are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from enum import Enum
from typing import Optional, Union

# Values attached to event fields and derived attributes. Dates are calendar
# days, datetimes are naive with minute precision, durations are timedeltas.
Value = Union[None, bool, int, float, str, date, datetime, timedelta, list]

_SNAKE_KEY = re.compile(r"^[a-z][a-z0-9_]*$")


class SourceKind(Enum):
    MUSIC_STREAM = "music_stream"
    MOVIE_STREAM = "movie_stream"
    TV_SERIES_STREAM = "tv_series_stream"
    WORKOUT = "workout"
    PURCHASE = "purchase"
    CALENDAR_ENTRY = "calendar_entry"
    SOCIAL_MEDIA_POST = "social_media_post"
    MAIL = "mail"

    @classmethod
    def parse(cls, name: str) -> "SourceKind":
        """Accepts the CamelCase wire name ("MusicStream") or the snake value."""
        key = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", "_", name.strip()).lower()
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown source kind: {name!r}")

    @property
    def wire_name(self) -> str:
        return "".join(part.capitalize() for part in self.value.split("_"))


# Canonical-constituent priority used by deduplication and extraction: the
# structured source wins over the calendar entry, which wins over mail/posts.
SOURCE_PRIORITY = {
    SourceKind.WORKOUT: 0,
    SourceKind.PURCHASE: 0,
    SourceKind.MUSIC_STREAM: 0,
    SourceKind.MOVIE_STREAM: 0,
    SourceKind.TV_SERIES_STREAM: 0,
    SourceKind.CALENDAR_ENTRY: 1,
    SourceKind.MAIL: 2,
    SourceKind.SOCIAL_MEDIA_POST: 3,
}


@dataclass(frozen=True)
class TemporalScope:
    """Closed [start, end] interval; point events have start == end."""

    start: datetime
    end: datetime

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"scope start {self.start} after end {self.end}")


def temporal_overlap(a: TemporalScope, b: TemporalScope) -> bool:
    """Closed-interval intersection test; a point inside an interval overlaps."""
    return max(a.start, b.start) <= min(a.end, b.end)


@dataclass(frozen=True)
class Event:
    id: str
    persona: str
    source: SourceKind
    scope: TemporalScope
    fields: dict = field(default_factory=dict)
    text: Optional[str] = None

    def __post_init__(self):
        for key in self.fields:
            if not _SNAKE_KEY.match(key):
                raise ValueError(f"event {self.id}: field key {key!r} is not lowercase snake_case")
        if not self.fields and not self.text:
            raise ValueError(f"event {self.id}: needs at least one of fields, text")


def format_value(value: Value) -> str:
    """Deterministic text form of a value, shared by verbalization and answers.

    Floats keep up to 4 decimals with trailing zeros trimmed; dates and
    datetimes render as ISO (minute precision); durations as whole minutes.
    """
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        text = f"{value:.4f}".rstrip("0").rstrip(".")
        return text if text not in ("", "-") else "0"
    if isinstance(value, datetime):
        return value.strftime("%Y-%m-%dT%H:%M")
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, timedelta):
        return f"{int(value.total_seconds() // 60)}m"
    if isinstance(value, list):
        return ", ".join(format_value(v) for v in value)
    return str(value)


def verbalize(event: Event) -> str:
    """Canonical lowercased text for an event, used for indexing and matching.

    Format: source kind, "key: value" pairs in sorted key order, the text
    body if any, then the scope as "from <start> to <end>", joined by " | ".
    """
    parts = [event.source.value]
    for key in sorted(event.fields):
        parts.append(f"{key}: {format_value(event.fields[key])}")
    if event.text:
        parts.append(event.text)
    start = event.scope.start.strftime("%Y-%m-%dT%H:%M")
    end = event.scope.end.strftime("%Y-%m-%dT%H:%M")
    parts.append(f"from {start} to {end}")
    return " | ".join(parts).lower()


# --- value comparison -------------------------------------------------------

_NUMERIC = (int, float)


def _family(value: Value) -> str:
    # bool first: it is an int subclass. datetime before date for the same reason.
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, _NUMERIC):
        return "number"
    if isinstance(value, datetime):
        return "temporal"
    if isinstance(value, date):
        return "temporal"
    if isinstance(value, timedelta):
        return "duration"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "list"
    return "null"


def coerce_temporal(value: Value) -> Optional[datetime]:
    """Dates coerce to the datetime at 00:00; datetimes pass through."""
    if isinstance(value, datetime):
        return value
    if isinstance(value, date):
        return datetime(value.year, value.month, value.day)
    return None


def value_compare(a: Value, b: Value) -> Optional[int]:
    """Three-way comparison: -1/0/+1, or None ("unknown") when incomparable.

    Numbers compare across int/float; dates coerce to midnight datetimes;
    strings compare case-insensitively. Any Null operand, lists, and
    cross-family pairs are unknown.
    """
    fa, fb = _family(a), _family(b)
    if fa == "null" or fb == "null" or fa != fb or fa == "list":
        return None
    if fa == "temporal":
        a, b = coerce_temporal(a), coerce_temporal(b)
    elif fa == "string":
        a, b = a.casefold(), b.casefold()
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


# --- store ------------------------------------------------------------------


class EventStore:
    """Immutable, deterministically ordered collection of events.

    Events are sorted by (scope.start, id); the persona index maps each
    persona to its event ids in that order.
    """

    def __init__(self, events):
        ordered = sorted(events, key=lambda e: (e.scope.start, e.id))
        self.events = tuple(ordered)
        self.by_id = {}
        self.persona_index = {}
        for event in ordered:
            if event.id in self.by_id:
                raise ValueError(f"duplicate event id {event.id!r}")
            self.by_id[event.id] = event
            self.persona_index.setdefault(event.persona, []).append(event.id)
        self.persona_index = {p: tuple(ids) for p, ids in self.persona_index.items()}

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def personas(self):
        return sorted(self.persona_index)

    def subset(self, persona: str) -> "EventStore":
        ids = self.persona_index.get(persona, ())
        return EventStore([self.by_id[i] for i in ids])
