#!/usr/bin/env python3
"""Compare the numba-compiled posting-list kernel with the numpy fallback.

Builds an index over a random corpus, analyzes a batch of queries, and times
``score_query`` with each accumulation backend.  Also reports the maximum
absolute score difference between the two (expected: 0.0).

Usage:
    python3 benchmarks/bench_kernels.py [--docs 20000] [--queries 200]
"""

import argparse
import time

import numpy as np

from expandrank import kernels
from expandrank.corpus import PassageStore
from expandrank.index import Bm25Params, build_index
from expandrank.synth import make_random_corpus, make_random_queries


def prepare(n_docs, n_queries, seed):
    passages = make_random_corpus(n_docs, seed=seed)
    store = PassageStore(passages)
    params = Bm25Params()
    index = build_index(store, params)
    analyzer = params.analyzer()
    prepared = []
    for q in make_random_queries(n_queries, passages, seed=seed,
                                 terms_per_query=6):
        terms, counts = np.unique(analyzer(q), return_counts=True)
        tids = np.array([index.vocab.get(t, -1) for t in terms], dtype=np.int64)
        keep = tids >= 0
        order = np.argsort(tids[keep])
        prepared.append((tids[keep][order],
                         counts[keep][order].astype(np.float64)))
    return index, prepared


def run(index, prepared, backend):
    out = []
    for tids, weights in prepared:
        scores = np.zeros(index.doc_count, dtype=np.float64)
        if tids.shape[0]:
            backend(tids, weights, index.post_offsets, index.post_docs,
                    index._tfs_f64, index.len_norm, index.params.k1 + 1.0,
                    index.idf, scores)
        out.append(scores)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--docs", type=int, default=20_000)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--repetitions", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"corpus: {args.docs} docs, {args.queries} queries, "
          f"{args.repetitions} repetitions")
    index, prepared = prepare(args.docs, args.queries, args.seed)

    backends = {"numpy": kernels._accumulate_np}
    if kernels.USING_NUMBA:
        # warm up so JIT compilation is not counted
        compiled = kernels.accumulate_scores
        run(index, prepared[:1], compiled)
        backends["numba"] = compiled
    else:
        print("numba unavailable or disabled; timing numpy fallback only")

    results = {}
    timings = {}
    for name, backend in backends.items():
        best = float("inf")
        for _ in range(args.repetitions):
            t0 = time.perf_counter()
            results[name] = run(index, prepared, backend)
            best = min(best, time.perf_counter() - t0)
        timings[name] = best
        per_q = 1e3 * best / len(prepared)
        print(f"{name:>6}: {best:.4f} s total, {per_q:.3f} ms/query")

    if len(results) == 2:
        diff = max(float(np.max(np.abs(a - b))) if a.size else 0.0
                   for a, b in zip(results["numpy"], results["numba"]))
        print(f"max |numpy - numba| score difference: {diff:g}")
        print(f"speedup (numpy / numba): "
              f"{timings['numpy'] / timings['numba']:.2f}x")


if __name__ == "__main__":
    main()
