"""EXTRACT operator: augments result items with requested key-value pairs.

Resolution order of the default extractor: derived temporal keys, raw fields
(including aliases) of the constituents in dedup-priority order, gazetteer
patterns over the verbalized text, then Null. A model-backed extractor can
replace it behind the same one-call contract.
"""

from __future__ import annotations

from dataclasses import replace
from importlib import resources
from typing import Optional, Tuple

from .events import SOURCE_PRIORITY, format_value, verbalize
from .results import ResultItem, canonical_event

_WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")

# keys derived from the canonical constituent's temporal scope
TEMPORAL_KEYS = ("date", "start_time", "end_time", "month", "year", "weekday")


class ExtractorUnavailable(Exception):
    pass


class Gazetteer:
    """Ordered pattern -> value table per key; case-insensitive substring
    match, first match wins. Plus a key-alias table for raw-field lookup."""

    def __init__(self, entries=(), aliases=()):
        self.entries = {}
        for key, pattern, value in entries:
            self.entries.setdefault(key, []).append((pattern.lower(), value))
        self.aliases = {key: tuple(names) for key, names in aliases}

    @classmethod
    def parse(cls, gazetteer_text: str = "", alias_text: str = "") -> "Gazetteer":
        entries = []
        for line in gazetteer_text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, pattern, value = line.split("\t", 2)
            entries.append((key, pattern, value))
        aliases = []
        for line in alias_text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, names = line.partition("\t")
            aliases.append((key, [n.strip() for n in names.split(",") if n.strip()]))
        return cls(entries, aliases)

    def dump(self) -> str:
        lines = []
        for key, pairs in self.entries.items():
            for pattern, value in pairs:
                lines.append(f"{key}\t{pattern}\t{value}")
        return "\n".join(lines) + "\n"

    def match(self, key: str, text: str):
        haystack = text.lower()
        for pattern, value in self.entries.get(key, ()):
            if pattern in haystack:
                return value
        return None


def _data_text(name: str) -> str:
    return resources.files("eventqa").joinpath("data", name).read_text(encoding="utf-8")


def default_gazetteer() -> Gazetteer:
    return Gazetteer.parse(_data_text("default_gazetteer.tsv"), _data_text("default_aliases.tsv"))


class DefaultExtractor:
    """Deterministic extractor over raw fields, temporal scope and gazetteer."""

    def __init__(self, gazetteer: Optional[Gazetteer] = None):
        self.gazetteer = gazetteer if gazetteer is not None else default_gazetteer()

    def extract(self, item: ResultItem, key: str):
        return default_extract_value(item, key, self.gazetteer)


class RemoteExtractor:
    """HTTP extractor: POST {verbalization, text, key} -> {value}."""

    def __init__(self, url: str, transport=None, timeout: float = 10.0):
        if transport is None:
            import requests

            def transport(u, payload):
                resp = requests.post(u, json=payload, timeout=timeout)
                resp.raise_for_status()
                return resp.json()

        self.url = url
        self.transport = transport

    def extract(self, item: ResultItem, key: str):
        event = canonical_event(item.events)
        try:
            doc = self.transport(self.url, {"verbalization": verbalize(event),
                                            "text": event.text or "", "key": key})
            return doc.get("value")
        except Exception as err:
            raise ExtractorUnavailable(str(err)) from err


def _priority_ordered(item: ResultItem):
    return sorted(item.events, key=lambda e: (SOURCE_PRIORITY[e.source], e.scope.start, e.id))


def default_extract_value(item: ResultItem, key: str, gazetteer: Gazetteer):
    """Resolution: (1) temporal keys from the canonical constituent's scope,
    (2) raw field or alias on any constituent in priority order,
    (3) gazetteer match on the verbalized constituents, (4) Null."""
    if not item.events:
        return None
    ordered = _priority_ordered(item)
    canonical = ordered[0]
    if key in TEMPORAL_KEYS:
        start, end = canonical.scope.start, canonical.scope.end
        if key == "date":
            return start.date()
        if key == "start_time":
            return start
        if key == "end_time":
            return end
        if key == "month":
            return f"{start.year:04d}-{start.month:02d}"
        if key == "year":
            return start.year
        return _WEEKDAYS[start.weekday()]
    names = (key,) + gazetteer.aliases.get(key, ())
    for event in ordered:
        for name in names:
            if name in event.fields:
                return event.fields[name]
    blob = " | ".join(verbalize(e) for e in ordered)
    return gazetteer.match(key, blob)


def extract(items, keys: Tuple[str, ...], extractor) -> Tuple[list, list]:
    """Runs the extractor for every (item, key); never overwrites existing
    attrs and never aborts: a failing extraction yields Null and is noted in
    the per-item trace detail."""
    out_items, detail = [], []
    for item in items:
        attrs = dict(item.attrs)
        pairs, errors = {}, {}
        for key in keys:
            if key in attrs:
                continue
            try:
                value = extractor.extract(item, key)
            except Exception as err:
                errors[key] = str(err)
                value = None
            attrs[key] = value
            pairs[key] = None if value is None else format_value(value)
        out_items.append(replace(item, attrs=attrs))
        row = {"events": [e.id for e in item.events], "pairs": pairs}
        if errors:
            row["errors"] = errors
        detail.append(row)
    return out_items, detail
