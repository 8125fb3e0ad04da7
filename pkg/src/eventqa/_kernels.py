"""Hot numeric kernels, JIT-compiled with numba when available.

Set EVENTQA_NUMBA=0 to force the pure-numpy implementations (the default is
to use numba when it imports). Both paths compute identical results; the
benchmark in benchmarks/bench_kernels.py compares them.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_enabled() -> bool:
    flag = os.environ.get("EVENTQA_NUMBA", "auto").lower()
    if flag in ("0", "false", "no", "off"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        if flag in ("1", "true", "yes", "on"):
            raise
        return False
    return True


USE_NUMBA = _numba_enabled()


def _bm25_accumulate_numpy(doc_idx, tfs, term_starts, term_ends, idf, doc_len, avgdl, k1, b, scores):
    for t in range(term_starts.shape[0]):
        s, e = term_starts[t], term_ends[t]
        if s == e:
            continue
        docs = doc_idx[s:e]
        tf = tfs[s:e]
        norm = k1 * (1.0 - b + b * doc_len[docs] / avgdl)
        scores[docs] += idf[t] * tf * (k1 + 1.0) / (tf + norm)
    return scores


def _overlap_edges_numpy(starts, ends, kinds):
    # starts must be sorted ascending; closed intervals.
    left, right = [], []
    n = starts.shape[0]
    for i in range(n):
        j = i + 1
        while j < n and starts[j] <= ends[i]:
            if kinds[i] != kinds[j]:
                left.append(i)
                right.append(j)
            j += 1
    return np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64)


if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _bm25_accumulate_numba(doc_idx, tfs, term_starts, term_ends, idf, doc_len, avgdl, k1, b, scores):
        for t in range(term_starts.shape[0]):
            for p in range(term_starts[t], term_ends[t]):
                d = doc_idx[p]
                tf = tfs[p]
                norm = k1 * (1.0 - b + b * doc_len[d] / avgdl)
                scores[d] += idf[t] * tf * (k1 + 1.0) / (tf + norm)
        return scores

    @njit(cache=True)
    def _overlap_edges_numba(starts, ends, kinds):
        n = starts.shape[0]
        cap = 16
        left = np.empty(cap, dtype=np.int64)
        right = np.empty(cap, dtype=np.int64)
        count = 0
        for i in range(n):
            j = i + 1
            while j < n and starts[j] <= ends[i]:
                if kinds[i] != kinds[j]:
                    if count == cap:
                        cap *= 2
                        new_left = np.empty(cap, dtype=np.int64)
                        new_right = np.empty(cap, dtype=np.int64)
                        new_left[:count] = left
                        new_right[:count] = right
                        left, right = new_left, new_right
                    left[count] = i
                    right[count] = j
                    count += 1
                j += 1
        return left[:count].copy(), right[:count].copy()


def bm25_scores(doc_idx, tfs, term_starts, term_ends, idf, doc_len, avgdl, k1, b, n_docs):
    """Accumulated BM25 scores over all docs for one query.

    Postings for the query terms are concatenated: term t owns the slice
    [term_starts[t], term_ends[t]) of doc_idx/tfs.
    """
    scores = np.zeros(n_docs, dtype=np.float64)
    if n_docs == 0 or term_starts.shape[0] == 0:
        return scores
    args = (doc_idx, tfs, term_starts, term_ends, idf, doc_len, float(avgdl), float(k1), float(b), scores)
    if USE_NUMBA:
        return _bm25_accumulate_numba(*args)
    return _bm25_accumulate_numpy(*args)


def overlap_edges(starts, ends, kinds):
    """Indices (i, j) of cross-kind pairs with overlapping closed intervals.

    Inputs must be sorted by start. Returns two int64 arrays of equal length.
    """
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    ends = np.ascontiguousarray(ends, dtype=np.int64)
    kinds = np.ascontiguousarray(kinds, dtype=np.int64)
    if starts.shape[0] == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    if USE_NUMBA:
        return _overlap_edges_numba(starts, ends, kinds)
    return _overlap_edges_numpy(starts, ends, kinds)
