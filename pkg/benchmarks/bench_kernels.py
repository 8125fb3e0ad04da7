#!/usr/bin/env python3
"""Benchmark the hot kernels: numba JIT vs the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py [--docs 20000] [--queries 200]
The numba path must be available; EVENTQA_NUMBA only affects library code,
this script calls both implementations directly.
"""

import argparse
import time

import numpy as np

from eventqa import _kernels


def synth_postings(rng, n_docs, n_terms, postings_per_term):
    doc_idx, tfs, starts, ends = [], [], [], []
    for _ in range(n_terms):
        starts.append(len(doc_idx))
        docs = np.sort(rng.choice(n_docs, size=postings_per_term, replace=False))
        doc_idx.extend(docs.tolist())
        tfs.extend(rng.integers(1, 5, size=postings_per_term).astype(float).tolist())
        ends.append(len(doc_idx))
    return (np.array(doc_idx, dtype=np.int64), np.array(tfs, dtype=np.float64),
            np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64))


def bench(label, fn, repeats=5):
    fn()  # warm up (includes JIT compilation)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    best = min(times)
    print(f"{label:<28} {best * 1000:9.2f} ms (best of {repeats})")
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--docs", type=int, default=20000)
    parser.add_argument("--terms", type=int, default=8)
    parser.add_argument("--postings", type=int, default=4000)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--intervals", type=int, default=30000)
    args = parser.parse_args()

    if not _kernels.USE_NUMBA:
        raise SystemExit("numba unavailable or disabled; nothing to compare")

    rng = np.random.default_rng(0)
    doc_idx, tfs, starts, ends = synth_postings(rng, args.docs, args.terms, args.postings)
    idf = rng.uniform(0.2, 3.0, size=args.terms)
    doc_len = rng.uniform(10, 80, size=args.docs)
    avgdl = float(doc_len.mean())

    print(f"BM25: {args.docs} docs, {args.terms} query terms x {args.postings} postings, "
          f"{args.queries} queries")

    def run_bm25(impl):
        def inner():
            for _ in range(args.queries):
                impl(doc_idx, tfs, starts, ends, idf, doc_len, avgdl, 1.2, 0.75,
                     np.zeros(args.docs))
        return inner

    t_numba = bench("bm25 numba", run_bm25(_kernels._bm25_accumulate_numba))
    t_numpy = bench("bm25 numpy fallback", run_bm25(_kernels._bm25_accumulate_numpy))
    print(f"{'bm25 speedup':<28} {t_numpy / t_numba:9.2f}x\n")

    i_starts = np.sort(rng.integers(0, 10_000_000, size=args.intervals))
    i_ends = i_starts + rng.integers(0, 50, size=args.intervals)
    kinds = rng.integers(0, 8, size=args.intervals)

    print(f"overlap sweep: {args.intervals} intervals")
    t_numba = bench("overlap numba", lambda: _kernels._overlap_edges_numba(i_starts, i_ends, kinds))
    t_numpy = bench("overlap numpy fallback",
                    lambda: _kernels._overlap_edges_numpy(i_starts, i_ends, kinds))
    print(f"{'overlap speedup':<28} {t_numpy / t_numba:9.2f}x")

    a = _kernels._bm25_accumulate_numba(doc_idx, tfs, starts, ends, idf, doc_len, avgdl,
                                        1.2, 0.75, np.zeros(args.docs))
    b = _kernels._bm25_accumulate_numpy(doc_idx, tfs, starts, ends, idf, doc_len, avgdl,
                                        1.2, 0.75, np.zeros(args.docs))
    assert np.array_equal(a, b), "paths disagree"
    print("\npaths agree bitwise on the benchmark inputs")


if __name__ == "__main__":
    main()
