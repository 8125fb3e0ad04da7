"""Intermediate result rows flowing between operators."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Tuple

from .events import SOURCE_PRIORITY, Event


@dataclass(frozen=True)
class ResultItem:
    """One row: constituent events plus derived attributes.

    More than one constituent appears after a JOIN or a duplicate merge.
    Group rows (GROUP_BY output) carry their members and expose the grouping
    keys in attrs.
    """

    events: Tuple[Event, ...] = ()
    attrs: dict = field(default_factory=dict)
    members: Optional[Tuple["ResultItem", ...]] = None
    group_keys: Tuple[str, ...] = ()

    def lookup(self, key: str):
        """Attribute resolution: attrs first, then raw fields of a
        single-constituent event, then Null."""
        if key in self.attrs:
            return self.attrs[key]
        if len(self.events) == 1:
            return self.events[0].fields.get(key)
        return None

    def effective_attrs(self) -> dict:
        """Visible attribute map; raw fields of a lone constituent included."""
        if len(self.events) == 1:
            merged = dict(self.events[0].fields)
            merged.update(self.attrs)
            return merged
        return dict(self.attrs)

    def start_anchor(self) -> Optional[datetime]:
        """Earliest scope.start among constituents, recursing into members."""
        starts = [e.scope.start for e in self.events]
        if self.members:
            starts += [s for m in self.members if (s := m.start_anchor()) is not None]
        return min(starts) if starts else None


def canonical_event(events) -> Event:
    """Highest-priority constituent (structured sources first), earliest start
    and smallest id breaking ties."""
    return min(events, key=lambda e: (SOURCE_PRIORITY[e.source], e.scope.start, e.id))
