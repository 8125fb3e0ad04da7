"""Data loading, the deterministic synthetic persona generator, and the
exhaustive answer oracle.

The generator plants co-referring duplicates with overlapping scopes and
emits the gazetteer and query-expansion table aligned with its vocabulary,
so deterministic extraction and retrieval are complete by construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Optional, Tuple

from . import templates
from .engine import Answer, render_answer
from .events import Event, EventStore, SourceKind, TemporalScope
from .extract import Gazetteer
from .plan_dsl import OperatorNode, parse_plan, serialize_plan
from .retrieve import ExpansionTable


class ParseError(Exception):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class TemplateUnsatisfiable(Exception):
    pass


class UnknownTemplate(Exception):
    pass


@dataclass(frozen=True)
class PersonaProfile:
    name: str
    preferences: dict        # artists, workout_types, cuisines, show_titles, movie_titles, purchase_categories
    date_range: Tuple[date, date]
    counts: dict             # SourceKind -> int

    def __post_init__(self):
        if self.date_range[0] > self.date_range[1]:
            raise ValueError("empty date range")
        if any(n < 0 for n in self.counts.values()):
            raise ValueError("negative event count")


@dataclass(frozen=True)
class GoldCase:
    question: str
    template_id: str
    plan: OperatorNode
    answer: Answer
    slots: dict = field(default_factory=dict)


# --- JSONL loading -------------------------------------------------------------

_TIME_FORMAT = "%Y-%m-%dT%H:%M"


def _parse_time(raw, line: int, key: str) -> datetime:
    try:
        return datetime.strptime(raw, _TIME_FORMAT)
    except (TypeError, ValueError):
        raise ParseError(line, f"bad {key!r} timestamp: {raw!r}") from None


def load_events(path, fmt: str = "jsonl") -> EventStore:
    """Loads the documented JSONL schema; any malformed record aborts with a
    ParseError carrying its line number."""
    if fmt != "jsonl":
        raise ValueError(f"unsupported format {fmt!r}")
    events = []
    seen = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ParseError(line_no, f"invalid JSON: {err.msg}") from None
            if not isinstance(record, dict):
                raise ParseError(line_no, "record is not an object")
            for key in ("persona", "source", "start", "end"):
                if key not in record:
                    raise ParseError(line_no, f"missing {key!r}")
            try:
                source = SourceKind.parse(record["source"])
            except ValueError as err:
                raise ParseError(line_no, str(err)) from None
            start = _parse_time(record["start"], line_no, "start")
            end = _parse_time(record["end"], line_no, "end")
            fields = record.get("fields") or {}
            if not isinstance(fields, dict):
                raise ParseError(line_no, "fields must be an object")
            text = record.get("text")
            event_id = record.get("id") or f"evt_{line_no:05d}"
            if event_id in seen:
                raise ParseError(line_no, f"duplicate event id {event_id!r}")
            seen.add(event_id)
            try:
                events.append(Event(id=event_id, persona=record["persona"], source=source,
                                    scope=TemporalScope(start, end), fields=fields, text=text))
            except ValueError as err:
                raise ParseError(line_no, str(err)) from None
    return EventStore(events)


def event_record(event: Event) -> dict:
    record = {
        "id": event.id,
        "persona": event.persona,
        "source": event.source.wire_name,
        "start": event.scope.start.strftime(_TIME_FORMAT),
        "end": event.scope.end.strftime(_TIME_FORMAT),
        "fields": event.fields,
    }
    if event.text is not None:
        record["text"] = event.text
    return record


def write_events(store: EventStore, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for event in store:
            handle.write(json.dumps(event_record(event), sort_keys=True) + "\n")


# --- generator vocabulary --------------------------------------------------------

ARTIST_POOL = ("Taylor Swift", "Dua Lipa", "Ed Sheeran", "Billie Eilish",
               "Arlo Finch", "Nova Reyes")
TRACK_POOL = ("Golden Hour", "Midnight Drive", "Paper Hearts", "Silver Lining",
              "Neon Skies", "Quiet Storm", "Wildflower", "Undertow")
WORKOUT_POOL = ("yoga", "running", "cycling", "swimming", "pilates", "hiking")
SHOW_POOL = ("Harbor Lights", "Night Shift", "The Long Road", "Cedar Falls", "Paper Trail")
MOVIE_POOL = ("Silent Horizon", "The Last Summer", "Iron Valley", "Crossing Lines", "Blue Meridian")
PURCHASE_POOL = {
    "electronics": ("wireless earbuds", "usb charger", "smart lamp", "bluetooth speaker"),
    "books": ("a paperback novel", "a cookbook", "a travel guide"),
    "clothing": ("a wool sweater", "canvas sneakers", "a rain jacket"),
    "kitchen": ("a cast iron pan", "a coffee grinder", "a ceramic bowl set"),
}
OTHER_CALENDAR = ("Team meeting", "Dentist appointment", "Call with the bank",
                  "Project review", "Haircut appointment", "Car service")
POST_DISTRACTORS = ("Beautiful sunset from the balcony tonight.", "Coffee with Sam downtown.",
                    "Finally organized the bookshelf.", "Rainy day, perfect for reading.",
                    "New haircut, feeling fresh!", "Board game night with friends.")
MAIL_DISTRACTORS = ("Your monthly newsletter has arrived.", "Reminder: utility bill due next week.",
                    "Security alert: new login to your account.", "Flight check-in opens tomorrow.",
                    "Library notice: return date approaching.")

_DEFAULT_MIX = {
    SourceKind.MUSIC_STREAM: 0.22, SourceKind.TV_SERIES_STREAM: 0.14,
    SourceKind.MOVIE_STREAM: 0.09, SourceKind.WORKOUT: 0.16,
    SourceKind.PURCHASE: 0.13, SourceKind.CALENDAR_ENTRY: 0.13,
    SourceKind.SOCIAL_MEDIA_POST: 0.07, SourceKind.MAIL: 0.06,
}


def default_profile(name: str = "persona", total_events: int = 2000, seed: int = 0) -> PersonaProfile:
    rng = random.Random(seed)
    counts = {kind: int(total_events * share) for kind, share in _DEFAULT_MIX.items()}
    counts[SourceKind.MUSIC_STREAM] += total_events - sum(counts.values())
    preferences = {
        "artists": tuple(sorted(rng.sample(ARTIST_POOL, 4))),
        "workout_types": tuple(sorted(rng.sample(WORKOUT_POOL, 4))),
        "cuisines": tuple(sorted(rng.sample(sorted(templates.CUISINE_LEXICON), 3))),
        "show_titles": tuple(sorted(rng.sample(SHOW_POOL, 3))),
        "movie_titles": tuple(sorted(rng.sample(MOVIE_POOL, 3))),
        "purchase_categories": tuple(sorted(rng.sample(sorted(PURCHASE_POOL), 3))),
    }
    return PersonaProfile(name=name, preferences=preferences,
                          date_range=(date(2024, 1, 1), date(2024, 11, 24)), counts=counts)


@dataclass
class GeneratedDataset:
    profile: PersonaProfile
    store: EventStore
    planted_pairs: Tuple[Tuple[str, str], ...]
    gazetteer: Gazetteer
    expansion: ExpansionTable


def build_expansion(profile: PersonaProfile) -> ExpansionTable:
    """Query-expansion table aligned with the generator vocabulary."""
    workout_tokens = ["workout", "workouts"] + list(profile.preferences["workout_types"])
    entries = [
        ("workout", workout_tokens),
        ("workouts", workout_tokens),
        ("music streams", ["music"]),
        ("music stream", ["music"]),
        ("streams", ["stream", "streams"]),
        ("tv series episodes", ["tv", "episode", "episodes"]),
        ("tv series", ["tv", "series"]),
        ("episodes", ["episode", "episodes"]),
        ("purchases", ["purchase", "purchases", "bought"]),
        ("starting", ["started", "starting", "start"]),
        ("moving", ["moved", "moving", "move"]),
        ("adopting", ["adopted", "adopting", "adopt"]),
    ]
    for cuisine in templates.CUISINE_LEXICON:
        entries.append((f"{cuisine} food", sorted(templates.cuisine_tokens(cuisine))))
    return ExpansionTable(entries)


def build_gazetteer(profile: PersonaProfile) -> Gazetteer:
    """Pattern table mapping restaurant and dish mentions to cuisines."""
    entries = []
    for cuisine, lexicon in templates.CUISINE_LEXICON.items():
        for pattern in lexicon["restaurants"] + lexicon["dishes"]:
            entries.append(("cuisine", pattern.lower(), cuisine))
    aliases = (("summary", ("title", "name", "subject")), ("title", ("summary", "name")))
    return Gazetteer(entries, aliases)


def generate_dataset(profile: PersonaProfile, seed: int,
                     duplicate_fraction: float = 0.3) -> GeneratedDataset:
    """Deterministic synthetic timeline for one persona.

    Every event gets its own (day, hour) slot so scopes never overlap by
    accident; planted duplicates are placed inside their original's scope.
    """
    if not 0.0 <= duplicate_fraction <= 1.0:
        raise ValueError("duplicate_fraction must be in [0, 1]")
    rng = random.Random(seed)
    start_day, end_day = profile.date_range
    days = [start_day + timedelta(days=i) for i in range((end_day - start_day).days + 1)]
    slots = [(day, hour) for day in days for hour in range(6, 22)]
    total = sum(profile.counts.values())
    if total > len(slots):
        raise ValueError(f"profile wants {total} events but only {len(slots)} slots exist")
    rng.shuffle(slots)
    slot_iter = iter(slots)

    prefs = profile.preferences
    events = []
    next_id = [0]

    def make(source, fields=None, text=None, minutes=0):
        day, hour = next(slot_iter)
        minute = rng.randint(0, 4)
        begin = datetime(day.year, day.month, day.day, hour, minute)
        next_id[0] += 1
        event = Event(id=f"evt_{next_id[0]:05d}", persona=profile.name, source=source,
                      scope=TemporalScope(begin, begin + timedelta(minutes=minutes)),
                      fields=fields or {}, text=text)
        events.append(event)
        return event

    meals = []
    eligible = []  # structured originals that may receive a co-referring duplicate
    for kind in SourceKind:
        count = profile.counts.get(kind, 0)
        for i in range(count):
            if kind is SourceKind.WORKOUT:
                wt = rng.choice(prefs["workout_types"])
                event = make(kind, {"workout_type": wt, "duration_min": rng.randint(20, 50)},
                             minutes=rng.randint(20, 50))
                eligible.append(event)
            elif kind is SourceKind.MUSIC_STREAM:
                event = make(kind, {"artist": rng.choice(prefs["artists"]),
                                    "track": rng.choice(TRACK_POOL)}, minutes=3)
                eligible.append(event)
            elif kind is SourceKind.MOVIE_STREAM:
                event = make(kind, {"title": rng.choice(prefs["movie_titles"])}, minutes=50)
                eligible.append(event)
            elif kind is SourceKind.TV_SERIES_STREAM:
                event = make(kind, {"series": rng.choice(prefs["show_titles"]),
                                    "episode": f"S{rng.randint(1, 3):02d}E{rng.randint(1, 12):02d}"},
                             minutes=rng.randint(20, 45))
                eligible.append(event)
            elif kind is SourceKind.PURCHASE:
                category = rng.choice(prefs["purchase_categories"])
                event = make(kind, {"item": rng.choice(PURCHASE_POOL[category]),
                                    "category": category,
                                    "price_eur": round(rng.uniform(5, 120), 2)})
                eligible.append(event)
            elif kind is SourceKind.CALENDAR_ENTRY:
                if i < len(templates.ANCHORS):
                    make(kind, {"summary": templates.ANCHORS[i]["summary"]}, minutes=30)
                elif rng.random() < 0.6:
                    cuisine = rng.choice(prefs["cuisines"])
                    restaurant = rng.choice(templates.CUISINE_LEXICON[cuisine]["restaurants"])
                    meal_kind = rng.choice(("Dinner", "Lunch"))
                    event = make(kind, {"summary": f"{meal_kind} at {restaurant}"},
                                 minutes=rng.randint(40, 50))
                    meals.append((event, cuisine))
                    eligible.append(event)
                else:
                    make(kind, {"summary": rng.choice(OTHER_CALENDAR)}, minutes=30)
            elif kind is SourceKind.SOCIAL_MEDIA_POST:
                make(kind, text=rng.choice(POST_DISTRACTORS))
            else:
                make(kind, text=rng.choice(MAIL_DISTRACTORS))

    meal_cuisine = dict((event.id, cuisine) for event, cuisine in meals)
    n_duplicates = round(len(eligible) * duplicate_fraction)
    chosen = sorted(rng.sample(range(len(eligible)), n_duplicates))
    planted = []
    for index in chosen:
        original = eligible[index]
        duration = int((original.scope.end - original.scope.start).total_seconds() // 60)
        if duration >= 2:
            offset = rng.randint(1, duration - 1)
            point = original.scope.start + timedelta(minutes=offset)
        else:
            point = original.scope.start
        next_id[0] += 1
        dup_id = f"evt_{next_id[0]:05d}"
        fields, text = {}, None
        if original.source is SourceKind.WORKOUT:
            wt = original.fields["workout_type"]
            if rng.random() < 0.5:
                kind = SourceKind.SOCIAL_MEDIA_POST
                text = rng.choice((f"Great {wt} session this morning!",
                                   f"Finished a {original.fields['duration_min']} minute {wt} workout. Feeling strong!"))
            else:
                kind = SourceKind.CALENDAR_ENTRY
                fields = {"summary": f"{wt.capitalize()} class"}
        elif original.source is SourceKind.MUSIC_STREAM:
            kind = SourceKind.SOCIAL_MEDIA_POST
            text = f"Listening to {original.fields['track']} by {original.fields['artist']} on repeat!"
        elif original.source is SourceKind.MOVIE_STREAM:
            kind = SourceKind.SOCIAL_MEDIA_POST
            text = f"Movie night: watched {original.fields['title']}!"
        elif original.source is SourceKind.TV_SERIES_STREAM:
            kind = SourceKind.SOCIAL_MEDIA_POST
            text = f"Binged another episode of {original.fields['series']} tonight."
        elif original.source is SourceKind.PURCHASE:
            if rng.random() < 0.5:
                kind = SourceKind.MAIL
                text = f"Receipt: you bought {original.fields['item']}."
            else:
                kind = SourceKind.SOCIAL_MEDIA_POST
                text = f"Just bought {original.fields['item']}. So happy with it!"
        else:  # meal calendar entry
            cuisine = meal_cuisine[original.id]
            dish = rng.choice(templates.CUISINE_LEXICON[cuisine]["dishes"])
            kind = SourceKind.SOCIAL_MEDIA_POST
            text = f"Amazing {dish} at the table tonight!"
        events.append(Event(id=dup_id, persona=profile.name, source=kind,
                            scope=TemporalScope(point, point), fields=fields, text=text))
        planted.append((original.id, dup_id))

    return GeneratedDataset(profile=profile, store=EventStore(events),
                            planted_pairs=tuple(planted),
                            gazetteer=build_gazetteer(profile),
                            expansion=build_expansion(profile))


def generate_persona(profile: PersonaProfile, seed: int,
                     duplicate_fraction: float = 0.3) -> EventStore:
    return generate_dataset(profile, seed, duplicate_fraction).store


# --- questions and oracle ---------------------------------------------------------


def oracle_answer(store: EventStore, template_id: str, slots: dict) -> Answer:
    """Exhaustive reference answer: straight loops over raw events, no
    operator tree, no retrieval pipeline."""
    try:
        template = templates.get_template(template_id)
    except KeyError:
        raise UnknownTemplate(template_id) from None
    answer = template.oracle(store, slots)
    if answer is None:
        raise TemplateUnsatisfiable(f"{template_id} with {slots}")
    return answer


def generate_questions(store: EventStore, profile: PersonaProfile, seed: int, n: int) -> list:
    """n gold cases sampled round-robin over the catalog; unsatisfiable
    draws (empty aggregates, missing anchors) are resampled."""
    if n == 0:
        return []
    if len(store) == 0:
        raise TemplateUnsatisfiable("store is empty")
    rng = random.Random(seed)
    order = list(templates.CATALOG)
    rng.shuffle(order)
    cases = []
    attempts = 0
    limit = max(50, 40 * n)
    while len(cases) < n:
        if attempts >= limit:
            raise TemplateUnsatisfiable(f"only {len(cases)} of {n} questions satisfiable")
        attempts += 1
        template = order[len(cases) % len(order)]
        slots = template.sample_slots(profile, rng, store)
        if slots is None:
            continue
        answer = template.oracle(store, slots)
        if answer is None or answer.kind == "empty":
            continue
        question = template.render(slots, rng.randrange(len(template.variants)))
        plan = template.build_plan(slots, question)
        cases.append(GoldCase(question=question, template_id=template.id, plan=plan,
                              answer=answer, slots=dict(slots)))
    return cases


# --- bundle I/O ---------------------------------------------------------------------


def write_dataset(dataset: GeneratedDataset, out_dir, name: Optional[str] = None) -> dict:
    """Writes events, gazetteer, expansion table, profile and planted pairs;
    returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = name or dataset.profile.name
    paths = {
        "events": out / f"{name}.events.jsonl",
        "gazetteer": out / f"{name}.gazetteer.tsv",
        "expansion": out / f"{name}.expansion.tsv",
        "profile": out / f"{name}.profile.json",
        "pairs": out / f"{name}.pairs.json",
    }
    write_events(dataset.store, paths["events"])
    paths["gazetteer"].write_text(dataset.gazetteer.dump(), encoding="utf-8")
    paths["expansion"].write_text(dataset.expansion.dump(), encoding="utf-8")
    profile = dataset.profile
    paths["profile"].write_text(json.dumps({
        "name": profile.name,
        "preferences": {k: list(v) for k, v in profile.preferences.items()},
        "date_range": [profile.date_range[0].isoformat(), profile.date_range[1].isoformat()],
        "counts": {kind.wire_name: n for kind, n in profile.counts.items()},
    }, indent=2, sort_keys=True), encoding="utf-8")
    paths["pairs"].write_text(json.dumps([list(p) for p in dataset.planted_pairs]), encoding="utf-8")
    return paths


def write_cases(cases, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for case in cases:
            handle.write(json.dumps({
                "question": case.question,
                "template": case.template_id,
                "plan": serialize_plan(case.plan),
                "answer": {"kind": case.answer.kind, "display": render_answer(case.answer)},
            }, sort_keys=True) + "\n")


def load_cases(path) -> list:
    """Loads gold cases; answers come back as display strings wrapped in
    scalar answers, which is all the metrics need."""
    cases = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            doc = json.loads(line)
            answer = Answer.scalar(doc["answer"]["display"])
            cases.append(GoldCase(question=doc["question"], template_id=doc["template"],
                                  plan=parse_plan(doc["plan"]), answer=answer))
    return cases


def sidecar_tables(events_path):
    """Discovers <base>.gazetteer.tsv / <base>.expansion.tsv next to an
    events file named <base>.events.jsonl; returns (gazetteer, expansion),
    either of which may be None."""
    path = Path(events_path)
    base = path.name[:-len(".events.jsonl")] if path.name.endswith(".events.jsonl") else path.stem
    gazetteer = expansion = None
    gaz_path = path.parent / f"{base}.gazetteer.tsv"
    if gaz_path.exists():
        gazetteer = Gazetteer.parse(gaz_path.read_text(encoding="utf-8"))
    exp_path = path.parent / f"{base}.expansion.tsv"
    if exp_path.exists():
        expansion = ExpansionTable.parse(exp_path.read_text(encoding="utf-8"))
    return gazetteer, expansion
