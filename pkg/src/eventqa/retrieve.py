"""RETRIEVE pipeline: sparse candidate scoring, pattern grouping, three-way
group classification, per-event scoring, and temporal-overlap deduplication.

The default scorers are deterministic and lexical; a model-backed scorer can
replace them behind the same contract (see RemoteScorer).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from typing import Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .events import SOURCE_PRIORITY, Event, EventStore, SourceKind, verbalize
from .results import ResultItem

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_EPOCH = datetime(1970, 1, 1)


def tokenize(text: str) -> list:
    """Lowercased alphanumeric runs; whitespace and punctuation separate."""
    return _TOKEN_RE.findall(text.lower())


def _data_text(name: str) -> str:
    return resources.files("eventqa").joinpath("data", name).read_text(encoding="utf-8")


def load_stopwords(text: str) -> frozenset:
    """One stopword per line; '#' comments allowed."""
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.add(line)
    return frozenset(words)


def default_stopwords() -> frozenset:
    return load_stopwords(_data_text("default_stopwords.txt"))


class ExpansionTable:
    """Phrase -> alternative-token expansions for matching beyond surface forms.

    File format: one entry per line, `phrase TAB token,token,...`. The
    expansion replaces the phrase, so include the original tokens when they
    should still match.
    """

    def __init__(self, entries=()):
        self.entries = {}
        for phrase, tokens in entries:
            key = tuple(tokenize(phrase))
            if key:
                self.entries[key] = tuple(dict.fromkeys(tokens))

    @classmethod
    def parse(cls, text: str) -> "ExpansionTable":
        entries = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            phrase, _, tokens = line.partition("\t")
            entries.append((phrase, [t.strip().lower() for t in tokens.split(",") if t.strip()]))
        return cls(entries)

    def dump(self) -> str:
        lines = []
        for phrase, tokens in sorted(self.entries.items()):
            lines.append(" ".join(phrase) + "\t" + ",".join(tokens))
        return "\n".join(lines) + "\n"


def default_expansions() -> ExpansionTable:
    return ExpansionTable.parse(_data_text("default_expansion.tsv"))


class QueryAnalyzer:
    """Turns a query into token groups: each group is a set of alternative
    tokens, any one of which counts as a match."""

    def __init__(self, stopwords: Optional[frozenset] = None,
                 expansions: Optional[ExpansionTable] = None):
        self.stopwords = default_stopwords() if stopwords is None else stopwords
        self.expansions = default_expansions() if expansions is None else expansions
        self._max_len = max((len(p) for p in self.expansions.entries), default=1)

    def analyze(self, query: str) -> Tuple[Tuple[str, ...], ...]:
        tokens = tokenize(query)
        groups = []
        i = 0
        while i < len(tokens):
            matched = False
            for span in range(min(self._max_len, len(tokens) - i), 0, -1):
                phrase = tuple(tokens[i:i + span])
                expansion = self.expansions.entries.get(phrase)
                if expansion is not None:
                    groups.append(expansion)
                    i += span
                    matched = True
                    break
            if not matched:
                if tokens[i] not in self.stopwords:
                    groups.append((tokens[i],))
                i += 1
        # drop duplicate groups, preserving first occurrence
        return tuple(dict.fromkeys(groups))

    def flat_terms(self, query: str) -> list:
        terms = []
        for group in self.analyze(query):
            terms.extend(group)
        return list(dict.fromkeys(terms))


# --- sparse index -----------------------------------------------------------


class SparseIndex:
    """Inverted index with BM25 scoring over event verbalizations.

    Postings live in flat numpy arrays (CSR layout) so the scoring loop can
    run through the numba kernel.
    """

    def __init__(self, store: EventStore):
        self.events = store.events
        self.n_docs = len(self.events)
        self.event_pos = {e.id: i for i, e in enumerate(self.events)}
        kinds = list(SourceKind)
        self._kind_code = {k: i for i, k in enumerate(kinds)}
        self.doc_sources = np.array([self._kind_code[e.source] for e in self.events], dtype=np.int64)

        self.vocabulary = {}
        per_term = {}
        doc_len = np.zeros(self.n_docs, dtype=np.float64)
        for pos, event in enumerate(self.events):
            tokens = tokenize(verbalize(event))
            doc_len[pos] = len(tokens)
            counts = {}
            for tok in tokens:
                counts[tok] = counts.get(tok, 0) + 1
            for tok, tf in counts.items():
                tid = self.vocabulary.setdefault(tok, len(self.vocabulary))
                per_term.setdefault(tid, []).append((pos, tf))

        n_terms = len(self.vocabulary)
        self.term_offsets = np.zeros(n_terms + 1, dtype=np.int64)
        doc_idx, tfs = [], []
        for tid in range(n_terms):
            postings = per_term.get(tid, [])
            self.term_offsets[tid + 1] = self.term_offsets[tid] + len(postings)
            for pos, tf in postings:
                doc_idx.append(pos)
                tfs.append(tf)
        self.post_doc = np.array(doc_idx, dtype=np.int64)
        self.post_tf = np.array(tfs, dtype=np.float64)
        self.doc_len = doc_len
        self.avgdl = float(doc_len.mean()) if self.n_docs else 1.0
        df = np.diff(self.term_offsets).astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.idf = np.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def doc_frequency(self, token: str) -> int:
        tid = self.vocabulary.get(token)
        if tid is None:
            return 0
        return int(self.term_offsets[tid + 1] - self.term_offsets[tid])

    def postings(self, token: str) -> list:
        tid = self.vocabulary.get(token)
        if tid is None:
            return []
        s, e = self.term_offsets[tid], self.term_offsets[tid + 1]
        return [(self.events[self.post_doc[p]].id, int(self.post_tf[p])) for p in range(s, e)]

    def raw_scores(self, terms: Sequence[str], k1: float, b: float) -> np.ndarray:
        tids = [self.vocabulary[t] for t in terms if t in self.vocabulary]
        if not tids or self.n_docs == 0:
            return np.zeros(self.n_docs, dtype=np.float64)
        starts = np.array([self.term_offsets[t] for t in tids], dtype=np.int64)
        ends = np.array([self.term_offsets[t + 1] for t in tids], dtype=np.int64)
        idf = self.idf[np.array(tids, dtype=np.int64)]
        return _kernels.bm25_scores(self.post_doc, self.post_tf, starts, ends, idf,
                                    self.doc_len, self.avgdl, k1, b, self.n_docs)


def build_index(store: EventStore) -> SparseIndex:
    return SparseIndex(store)


# --- configuration ----------------------------------------------------------


class ScorerUnavailable(Exception):
    pass


class TokenCoverageScorer:
    """Default relevance scorer: fraction of query token groups present in
    the verbalization, plus a 0.25 exact-phrase bonus, capped at 1.0."""

    def __init__(self, analyzer: Optional[QueryAnalyzer] = None):
        self.analyzer = analyzer or QueryAnalyzer()

    def score(self, query: str, verbalization: str) -> float:
        groups = self.analyzer.analyze(query)
        if not groups:
            return 0.0
        verb_tokens = tokenize(verbalization)
        present = set(verb_tokens)
        covered = sum(1 for group in groups if any(tok in present for tok in group))
        score = covered / len(groups)
        phrase = " ".join(tokenize(query))
        if phrase and phrase in " ".join(verb_tokens):
            score += 0.25
        return min(score, 1.0)


class RemoteScorer:
    """HTTP scorer: POST {query, verbalization} -> {score}. Raises
    ScorerUnavailable on any transport or payload problem."""

    def __init__(self, url: str, transport=None, timeout: float = 10.0):
        if transport is None:
            import requests

            def transport(u, payload):
                resp = requests.post(u, json=payload, timeout=timeout)
                resp.raise_for_status()
                return resp.json()

        self.url = url
        self.transport = transport

    def score(self, query: str, verbalization: str) -> float:
        try:
            doc = self.transport(self.url, {"query": query, "verbalization": verbalization})
            value = float(doc["score"])
        except Exception as err:
            raise ScorerUnavailable(str(err)) from err
        if not 0.0 <= value <= 1.0:
            raise ScorerUnavailable(f"score out of range: {value}")
        return value


@dataclass
class RetrievalConfig:
    top_k: int = 1000
    k1: float = 1.2
    b: float = 0.75
    tau: float = 0.5
    tau_hi: float = 0.8
    tau_lo: float = 0.2
    representatives: int = 3
    scorer: Optional[object] = None          # pluggable; None = TokenCoverageScorer
    analyzer: Optional[QueryAnalyzer] = None  # None = default stopwords/expansions
    dedup_enabled: bool = True

    def __post_init__(self):
        if not (0.0 <= self.tau_lo < self.tau_hi <= 1.0):
            raise ValueError(f"need 0 <= tau_lo < tau_hi <= 1, got {self.tau_lo}, {self.tau_hi}")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.representatives < 1:
            raise ValueError("representatives must be >= 1")

    def get_analyzer(self) -> QueryAnalyzer:
        if self.analyzer is None:
            self.analyzer = QueryAnalyzer()
        return self.analyzer

    def get_scorer(self):
        if self.scorer is None:
            self.scorer = TokenCoverageScorer(self.get_analyzer())
        return self.scorer


# --- pipeline stages ---------------------------------------------------------


def sparse_score(index: SparseIndex, query: str, k: int,
                 analyzer: Optional[QueryAnalyzer] = None,
                 k1: float = 1.2, b: float = 0.75,
                 sources: Optional[frozenset] = None) -> list:
    """Top-k (event id, BM25 score) pairs with score > 0, sorted by score
    descending then event id."""
    analyzer = analyzer or QueryAnalyzer()
    scores = index.raw_scores(analyzer.flat_terms(query), k1, b)
    if sources is not None:
        allowed = np.array([e.source in sources for e in index.events], dtype=bool)
        scores = np.where(allowed, scores, 0.0)
    hits = [(index.events[pos].id, float(scores[pos])) for pos in np.nonzero(scores > 0)[0]]
    hits.sort(key=lambda pair: (-pair[1], pair[0]))
    return hits[:k]


@dataclass(frozen=True)
class PatternSignature:
    """Grouping key for similar events: source kind plus field-key set."""

    source: SourceKind
    keys: Tuple[str, ...]

    @classmethod
    def of(cls, event: Event) -> "PatternSignature":
        return cls(event.source, tuple(sorted(event.fields)))


def group_candidates(candidates: Sequence[Tuple[str, float]], store: EventStore) -> list:
    """Partitions candidates by pattern signature; groups ordered by best
    member sparse score."""
    groups = {}
    best = {}
    for event_id, score in candidates:
        sig = PatternSignature.of(store.by_id[event_id])
        groups.setdefault(sig, []).append(event_id)
        if sig not in best or score > best[sig]:
            best[sig] = score
    ordered = sorted(groups, key=lambda sig: (-best[sig], min(groups[sig])))
    return [(sig, groups[sig]) for sig in ordered]


DROP_ALL = "drop_all"
RETAIN_ALL = "retain_all"
SCORE_EACH = "score_each"


@dataclass(frozen=True)
class GroupDecision:
    decision: str
    representatives: Tuple[str, ...] = ()
    scores: Tuple[float, ...] = ()


def score_event(event: Event, query: str, scorer) -> float:
    """Pluggable per-event relevance in [0, 1]."""
    return scorer.score(query, verbalize(event))


def classify_group(group: Sequence[Tuple[str, float]], query: str, scorer,
                   cfg: RetrievalConfig, store: EventStore) -> GroupDecision:
    """Three-way decision from the scores of the top sparse-ranked
    representatives. Strict thresholds: all above tau_hi retains the whole
    group, all below tau_lo drops it, anything else scores each member."""
    ranked = sorted(group, key=lambda pair: (-pair[1], pair[0]))
    reps = [event_id for event_id, _ in ranked[:min(cfg.representatives, len(ranked))]]
    try:
        rep_scores = [score_event(store.by_id[r], query, scorer) for r in reps]
    except ScorerUnavailable:
        return GroupDecision(SCORE_EACH, tuple(reps), ())
    if all(s > cfg.tau_hi for s in rep_scores):
        decision = RETAIN_ALL
    elif all(s < cfg.tau_lo for s in rep_scores):
        decision = DROP_ALL
    else:
        decision = SCORE_EACH
    return GroupDecision(decision, tuple(reps), tuple(rep_scores))


def _minutes(dt: datetime) -> int:
    return int((dt - _EPOCH).total_seconds() // 60)


def deduplicate(events: Sequence[Event], enabled: bool = True) -> list:
    """Merges cross-kind events with overlapping temporal scopes into one
    item per connected component; same-kind events never merge. The merged
    item's attrs come from the highest-priority constituent."""
    ordered = sorted(events, key=lambda e: (e.scope.start, e.id))
    if not enabled or not ordered:
        return [ResultItem(events=(e,)) for e in ordered]
    starts = np.array([_minutes(e.scope.start) for e in ordered], dtype=np.int64)
    ends = np.array([_minutes(e.scope.end) for e in ordered], dtype=np.int64)
    kind_code = {kind: i for i, kind in enumerate(SourceKind)}
    kinds = np.array([kind_code[e.source] for e in ordered], dtype=np.int64)
    left, right = _kernels.overlap_edges(starts, ends, kinds)

    parent = list(range(len(ordered)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(left.tolist(), right.tolist()):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    components = {}
    for pos in range(len(ordered)):
        components.setdefault(find(pos), []).append(pos)

    items = []
    for members in components.values():
        constituents = sorted((ordered[p] for p in members),
                              key=lambda e: (SOURCE_PRIORITY[e.source], e.scope.start, e.id))
        attrs = dict(constituents[0].fields) if len(constituents) > 1 else {}
        items.append(ResultItem(events=tuple(constituents), attrs=attrs))
    items.sort(key=lambda item: (item.events[0].scope.start, item.events[0].id))
    return items


def retrieve(query: str, store: EventStore, index: SparseIndex, cfg: RetrievalConfig,
             sources: Optional[frozenset] = None) -> Tuple[list, dict]:
    """Full pipeline; returns (result items, per-event trace detail)."""
    analyzer = cfg.get_analyzer()
    scorer = cfg.get_scorer()
    default_scorer = TokenCoverageScorer(analyzer)
    candidates = sparse_score(index, query, cfg.top_k, analyzer, cfg.k1, cfg.b, sources)
    sparse_by_id = dict(candidates)
    grouped = group_candidates(candidates, store)

    retained = []
    event_rows = {}
    group_rows = []
    for sig, member_ids in grouped:
        members = [(event_id, sparse_by_id[event_id]) for event_id in member_ids]
        decision = classify_group(members, query, scorer, cfg, store)
        group_rows.append({
            "source": sig.source.wire_name,
            "keys": list(sig.keys),
            "decision": decision.decision,
            "representatives": list(decision.representatives),
            "representative_scores": [round(s, 6) for s in decision.scores],
        })
        rep_scores = dict(zip(decision.representatives, decision.scores))
        for event_id, sparse in members:
            row = {"event": event_id, "sparse": round(sparse, 6),
                   "classifier": None, "path": "pattern", "retained": False}
            if decision.decision == SCORE_EACH:
                row["path"] = "per-event"
                if event_id in rep_scores:
                    score = rep_scores[event_id]
                else:
                    try:
                        score = score_event(store.by_id[event_id], query, scorer)
                    except ScorerUnavailable:
                        score = score_event(store.by_id[event_id], query, default_scorer)
                row["classifier"] = round(score, 6)
                row["retained"] = score >= cfg.tau
            else:
                if event_id in rep_scores:
                    row["classifier"] = round(rep_scores[event_id], 6)
                row["retained"] = decision.decision == RETAIN_ALL
            if row["retained"]:
                retained.append(store.by_id[event_id])
            event_rows[event_id] = row

    items = deduplicate(retained, cfg.dedup_enabled)
    detail = {
        "query": query,
        "groups": group_rows,
        "events": [event_rows[event_id] for event_id, _ in candidates],
        "merges": [[e.id for e in item.events] for item in items if len(item.events) > 1],
    }
    return items, detail
