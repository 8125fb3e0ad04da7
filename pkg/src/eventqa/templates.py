"""Question template catalog.

Each template couples a question surface form, a plan builder, and an
exhaustive oracle that answers by straight loops over raw events. The
generator renders questions from the same catalog the planner matches
against, so the two stay in lockstep by construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .engine import Answer
from .events import EventStore, SourceKind
from .plan_dsl import (APPLY, EXTRACT, FILTER, GROUP_BY, JOIN, MAP, RETRIEVE,
                       Attr, Call, Lit, OperatorNode)
from .results import ResultItem
from .retrieve import tokenize

MONTH_NAMES = ("January", "February", "March", "April", "May", "June", "July",
               "August", "September", "October", "November", "December")

# cuisine -> distinctive vocabulary; tokens must stay unique across cuisines
CUISINE_LEXICON = {
    "italian": {
        "restaurants": ("Trattoria Roma", "La Piazza", "Osteria Verde"),
        "dishes": ("pizza", "carbonara", "tiramisu"),
    },
    "mexican": {
        "restaurants": ("Casa Bonita", "El Camino Grill"),
        "dishes": ("tacos", "burritos", "quesadillas"),
    },
    "japanese": {
        "restaurants": ("Sakura House", "Tokyo Bowl"),
        "dishes": ("sushi", "ramen", "tempura"),
    },
    "indian": {
        "restaurants": ("Taj Spice", "Bombay Kitchen"),
        "dishes": ("curry", "biryani", "samosas"),
    },
}

# life anchors; the generator plants exactly one calendar entry per phrase
ANCHORS = (
    {"phrase": "starting my thesis", "summary": "Started working on my thesis", "keyword": "thesis"},
    {"phrase": "moving into my new apartment", "summary": "Moved into my new apartment", "keyword": "apartment"},
    {"phrase": "adopting my dog", "summary": "Adopted my dog Biscuit", "keyword": "dog"},
)


def cuisine_tokens(cuisine: str) -> frozenset:
    entry = CUISINE_LEXICON[cuisine]
    tokens = {cuisine}
    for name in entry["restaurants"] + entry["dishes"]:
        tokens.update(tokenize(name))
    return frozenset(tokens)


def summary_cuisine(summary: str) -> Optional[str]:
    present = set(tokenize(summary))
    for cuisine in CUISINE_LEXICON:
        if present & cuisine_tokens(cuisine):
            return cuisine
    return None


# --- plan-building helpers ----------------------------------------------------


def _retrieve(query: str) -> OperatorNode:
    return OperatorNode(RETRIEVE, query=query, sub_question=query)


def _extract(child: OperatorNode, *keys: str) -> OperatorNode:
    return OperatorNode(EXTRACT, (child,), keys=tuple(keys))


def _filter(child: OperatorNode, predicate) -> OperatorNode:
    return OperatorNode(FILTER, (child,), predicate=predicate)


def _apply_len(child: OperatorNode, question: str) -> OperatorNode:
    return OperatorNode(APPLY, (child,), fn="len", sub_question=question)


def _eq(key: str, value) -> Call:
    return Call("eq", (Attr(key), Lit(value)))


def _contains(key: str, value: str) -> Call:
    return Call("contains", (Attr(key), Lit(value)))


_AFTER_PREDICATE = Call("and", (
    Call("same_day", (Attr("date", "left"), Attr("date", "right"))),
    Call("gt", (Attr("start_time", "left"), Attr("end_time", "right"))),
))


# --- template definitions -------------------------------------------------------


@dataclass(frozen=True)
class Template:
    id: str
    category: str
    variants: Tuple[str, ...]
    slot_patterns: dict
    build_plan: Callable
    oracle: Callable
    sample_slots: Callable

    def patterns(self):
        compiled = []
        for variant in self.variants:
            regex = re.escape(variant)
            for slot, pat in self.slot_patterns.items():
                regex = regex.replace(re.escape("{%s}" % slot), f"(?P<{slot}>{pat})")
            compiled.append(re.compile(f"^{regex}[?.!]*$", re.IGNORECASE))
        return compiled

    def render(self, slots: dict, variant_index: int) -> str:
        display = dict(slots)
        if "cuisine" in display:
            display["cuisine"] = display["cuisine"].capitalize()
        return self.variants[variant_index % len(self.variants)].format(**display)


_ARTIST = r"[A-Za-z][A-Za-z .'&-]*?"
_WORD = r"[A-Za-z]+"
_YEAR = r"\d{4}"
_MONTH = "|".join(MONTH_NAMES)
_ANCHOR = "|".join(a["phrase"] for a in ANCHORS)


def _month_slot(raw: dict) -> dict:
    slots = dict(raw)
    if "month_name" in slots:
        number = [m.lower() for m in MONTH_NAMES].index(slots["month_name"].lower()) + 1
        slots["month"] = f"{int(slots['year']):04d}-{number:02d}"
    return slots


def _normalize_slots(groups: dict) -> dict:
    slots = {k: v.strip() for k, v in groups.items()}
    for key in ("cuisine", "wt", "category"):
        if key in slots:
            slots[key] = slots[key].lower()
    if "anchor" in slots:
        slots["anchor"] = slots["anchor"].lower()
    return _month_slot(slots)


def _workouts(store: EventStore, wt: Optional[str] = None):
    for e in store:
        if e.source is SourceKind.WORKOUT:
            if wt is None or wt.casefold() in str(e.fields.get("workout_type", "")).casefold():
                yield e


def _streams(store: EventStore, artist: Optional[str] = None):
    for e in store:
        if e.source is SourceKind.MUSIC_STREAM:
            if artist is None or str(e.fields.get("artist", "")).casefold() == artist.casefold():
                yield e


# T1: count streams by artist ---------------------------------------------------


def _t1_plan(slots, question):
    chain = _filter(_extract(_retrieve("music streams"), "artist"), _eq("artist", slots["artist"]))
    return _apply_len(chain, question)


def _t1_oracle(store, slots):
    return Answer.scalar(sum(1 for _ in _streams(store, slots["artist"])))


def _t1_sample(profile, rng, store):
    return {"artist": rng.choice(profile.preferences["artists"])}


# T2: count streams by artist in a month ----------------------------------------


def _t2_plan(slots, question):
    pred = Call("and", (_eq("artist", slots["artist"]), _eq("month", slots["month"])))
    chain = _filter(_extract(_retrieve("music streams"), "artist", "month"), pred)
    return _apply_len(chain, question)


def _t2_oracle(store, slots):
    n = sum(1 for e in _streams(store, slots["artist"])
            if e.scope.start.strftime("%Y-%m") == slots["month"])
    return Answer.scalar(n)


def _t2_sample(profile, rng, store):
    start, end = profile.date_range
    months = []
    date_month = (start.year, start.month)
    while date_month <= (end.year, end.month):
        months.append(date_month)
        year, month = date_month
        date_month = (year + 1, 1) if month == 12 else (year, month + 1)
    year, month = rng.choice(months)
    return {"artist": rng.choice(profile.preferences["artists"]),
            "month_name": MONTH_NAMES[month - 1], "year": str(year),
            "month": f"{year:04d}-{month:02d}"}


# T3: count workouts of a type ----------------------------------------------------


def _t3_plan(slots, question):
    chain = _filter(_extract(_retrieve("workout events"), "workout_type"),
                    _contains("workout_type", slots["wt"]))
    return _apply_len(chain, question)


def _t3_oracle(store, slots):
    return Answer.scalar(sum(1 for _ in _workouts(store, slots["wt"])))


def _t3_sample(profile, rng, store):
    return {"wt": rng.choice(profile.preferences["workout_types"])}


# T4: count meals of a cuisine after a workout (optionally type-filtered) ---------


def _t4_plan(slots, question):
    left = _extract(_retrieve(f"instances of eating {slots['cuisine']} food"), "date", "start_time")
    wt = slots.get("wt")
    if wt:
        right = _filter(_extract(_retrieve("workout events"), "date", "end_time", "workout_type"),
                        _contains("workout_type", wt))
    else:
        right = _extract(_retrieve("workout events"), "date", "end_time")
    join = OperatorNode(JOIN, (left, right), predicate=_AFTER_PREDICATE)
    return _apply_len(join, question)


def _t4_oracle(store, slots):
    meals = [e for e in store if e.source is SourceKind.CALENDAR_ENTRY
             and summary_cuisine(str(e.fields.get("summary", ""))) == slots["cuisine"]]
    workouts = list(_workouts(store, slots.get("wt")))
    pairs = 0
    for meal in meals:
        for workout in workouts:
            if (meal.scope.start.date() == workout.scope.start.date()
                    and meal.scope.start > workout.scope.end):
                pairs += 1
    return Answer.scalar(pairs)


def _t4_sample(profile, rng, store):
    slots = {"cuisine": rng.choice(profile.preferences["cuisines"])}
    if rng.random() < 0.5:
        slots["wt"] = rng.choice(profile.preferences["workout_types"])
    return slots


# T5: month with the most streams of an artist ------------------------------------


def _t5_plan(slots, question):
    # the artist mention alone is the selective part: generic stream tokens
    # would pull every stream into the candidate set and a retain-all group
    # decision would keep them
    artist = slots["artist"].lower()
    leaf = OperatorNode(RETRIEVE, query=artist, sub_question=f"music streams by {artist}")
    chain = _extract(leaf, "month")
    grouped = OperatorNode(GROUP_BY, (chain,), keys=("month",))
    counted = OperatorNode(MAP, (grouped,),
                           assignments=(("play_count", Call("len", (Attr("group"),))),))
    return OperatorNode("ARGMAX", (counted,), key="play_count", sub_question=question)


def _t5_oracle(store, slots):
    months = {}
    for e in _streams(store, slots["artist"]):
        months.setdefault(e.scope.start.strftime("%Y-%m"), []).append(e)
    if not months:
        return Answer.empty()
    best = max(len(v) for v in months.values())
    winners = [(min(e.scope.start for e in events), month)
               for month, events in months.items() if len(events) == best]
    winners.sort()
    return Answer.item_list([ResultItem(attrs={"month": month}, group_keys=("month",))
                             for _, month in winners])


def _t5_sample(profile, rng, store):
    return {"artist": rng.choice(profile.preferences["artists"])}


# T6: count tv episodes since a life anchor ----------------------------------------


def _t6_plan(slots, question):
    left = _extract(_retrieve("tv series episodes"), "date")
    anchor = OperatorNode("ARGMIN", (_extract(_retrieve(slots["anchor"]), "date"),), key="date")
    join = OperatorNode(JOIN, (left, anchor),
                        predicate=Call("ge", (Attr("date", "left"), Attr("date", "right"))))
    return _apply_len(join, question)


def _t6_oracle(store, slots):
    keyword = next(a["keyword"] for a in ANCHORS if a["phrase"] == slots["anchor"])
    anchors = [e for e in store if e.source is SourceKind.CALENDAR_ENTRY
               and keyword in tokenize(str(e.fields.get("summary", "")))]
    if not anchors:
        return None
    anchor_date = min(e.scope.start for e in anchors).date()
    n = sum(1 for e in store if e.source is SourceKind.TV_SERIES_STREAM
            and e.scope.start.date() >= anchor_date)
    return Answer.scalar(n)


def _t6_sample(profile, rng, store):
    return {"anchor": rng.choice(ANCHORS)["phrase"]}


# T7/T8/T9: workout-minute aggregates ----------------------------------------------


def _t7_plan(slots, question):
    chain = _filter(_extract(_retrieve("workout events"), "duration_min", "workout_type"),
                    _contains("workout_type", slots["wt"]))
    return OperatorNode("SUM", (chain,), key="duration_min", sub_question=question)


def _t7_oracle(store, slots):
    return Answer.scalar(sum(e.fields["duration_min"] for e in _workouts(store, slots["wt"])))


def _t8_plan(slots, question):
    return OperatorNode("MAX", (_extract(_retrieve("workout events"), "duration_min"),),
                        key="duration_min", sub_question=question)


def _t8_oracle(store, slots):
    durations = [e.fields["duration_min"] for e in _workouts(store)]
    return Answer.scalar(max(durations)) if durations else Answer.empty()


def _t9_plan(slots, question):
    return OperatorNode("AVG", (_extract(_retrieve("workout events"), "duration_min"),),
                        key="duration_min", sub_question=question)


def _t9_oracle(store, slots):
    durations = [e.fields["duration_min"] for e in _workouts(store)]
    if not durations:
        return Answer.empty()
    return Answer.scalar(sum(durations) / len(durations))


def _no_slots(profile, rng, store):
    return {}


# T10: distinct artists --------------------------------------------------------------


def _t10_plan(slots, question):
    return OperatorNode(APPLY, (_extract(_retrieve("music streams"), "artist"),),
                        fn="distinct", key="artist", sub_question=question)


def _t10_oracle(store, slots):
    artists = {str(e.fields["artist"]).casefold() for e in _streams(store)}
    return Answer.scalar(len(artists))


# T11/T12: purchase counting and spend ------------------------------------------------


def _purchases(store, category=None):
    for e in store:
        if e.source is SourceKind.PURCHASE:
            if category is None or str(e.fields.get("category", "")).casefold() == category.casefold():
                yield e


def _t11_plan(slots, question):
    chain = _filter(_extract(_retrieve("purchases"), "category"), _eq("category", slots["category"]))
    return _apply_len(chain, question)


def _t11_oracle(store, slots):
    return Answer.scalar(sum(1 for _ in _purchases(store, slots["category"])))


def _t12_plan(slots, question):
    chain = _filter(_extract(_retrieve("purchases"), "category", "price_eur"),
                    _eq("category", slots["category"]))
    return OperatorNode("SUM", (chain,), key="price_eur", sub_question=question)


def _t12_oracle(store, slots):
    return Answer.scalar(sum(e.fields["price_eur"] for e in _purchases(store, slots["category"])))


def _category_sample(profile, rng, store):
    return {"category": rng.choice(profile.preferences["purchase_categories"])}


CATALOG = (
    Template("count_streams_artist", "counting",
             ("How many times did I listen to {artist}", "How often did I listen to {artist}"),
             {"artist": _ARTIST}, _t1_plan, _t1_oracle, _t1_sample),
    Template("count_streams_artist_month", "counting",
             ("How many times did I listen to {artist} in {month_name} {year}",
              "How many {artist} streams did I play in {month_name} {year}"),
             {"artist": _ARTIST, "month_name": _MONTH, "year": _YEAR},
             _t2_plan, _t2_oracle, _t2_sample),
    Template("count_workouts_type", "counting",
             ("How many {wt} workouts did I do", "How often did I do {wt} workouts"),
             {"wt": _WORD}, _t3_plan, _t3_oracle, _t3_sample),
    Template("count_meals_after_workout", "counting_temporal_join",
             ("How often did I eat {cuisine} food after a workout",
              "How many times did I have {cuisine} food after a workout"),
             {"cuisine": _WORD}, _t4_plan, _t4_oracle,
             lambda p, r, s: {"cuisine": r.choice(p.preferences["cuisines"])}),
    Template("count_meals_after_workout_typed", "counting_temporal_join",
             ("How often did I eat {cuisine} food after a {wt} workout",
              "How many times did I have {cuisine} food after a {wt} workout"),
             {"cuisine": _WORD, "wt": _WORD}, _t4_plan, _t4_oracle,
             lambda p, r, s: {"cuisine": r.choice(p.preferences["cuisines"]),
                              "wt": r.choice(p.preferences["workout_types"])}),
    Template("superlative_month_artist", "superlative_over_period",
             ("The month I listened to {artist} the most",
              "In which month did I listen to {artist} the most"),
             {"artist": _ARTIST}, _t5_plan, _t5_oracle, _t5_sample),
    Template("count_episodes_since_anchor", "aggregate_since_anchor",
             ("How many TV series episodes did I watch since {anchor}",
              "Number of TV series episodes I watched since {anchor}"),
             {"anchor": _ANCHOR}, _t6_plan, _t6_oracle, _t6_sample),
    Template("sum_workout_minutes", "filtered_aggregate",
             ("How many minutes did I spend on {wt} workouts",
              "Total minutes of my {wt} workouts"),
             {"wt": _WORD}, _t7_plan, _t7_oracle, _t3_sample),
    Template("max_workout_minutes", "filtered_aggregate",
             ("How many minutes did my longest workout last",
              "What was the duration in minutes of my longest workout"),
             {}, _t8_plan, _t8_oracle, _no_slots),
    Template("avg_workout_minutes", "filtered_aggregate",
             ("On average, how many minutes did my workouts last",
              "What was the average duration of my workouts in minutes"),
             {}, _t9_plan, _t9_oracle, _no_slots),
    Template("distinct_artists", "counting",
             ("How many different artists did I listen to",
              "How many distinct artists have I streamed"),
             {}, _t10_plan, _t10_oracle, _no_slots),
    Template("count_purchases_category", "counting",
             ("How many {category} purchases did I make",
              "How many times did I buy {category} items"),
             {"category": _WORD}, _t11_plan, _t11_oracle, _category_sample),
    Template("sum_spent_category", "filtered_aggregate",
             ("How much did I spend on {category} items",
              "What did my {category} purchases cost in total"),
             {"category": _WORD}, _t12_plan, _t12_oracle, _category_sample),
)

_BY_ID = {t.id: t for t in CATALOG}


def get_template(template_id: str) -> Template:
    if template_id not in _BY_ID:
        raise KeyError(template_id)
    return _BY_ID[template_id]


def match_question(question: str):
    """Returns (template, slots) for the first catalog pattern matching the
    question, or None."""
    normalized = " ".join(question.split())
    for template in CATALOG:
        for pattern in template.patterns():
            m = pattern.match(normalized)
            if m:
                return template, _normalize_slots(m.groupdict())
    return None


def build_plan(template_id: str, slots: dict, question: str) -> OperatorNode:
    return get_template(template_id).build_plan(slots, question)
