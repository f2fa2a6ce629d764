#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the two hot paths on synthetic data, checks that both backends
produce identical results, and prints a timing table.

    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import string
import time

import numpy as np

from xlingqa._kernels import pure

try:
    from xlingqa._kernels import _native as native
except ImportError:
    native = None


def bench(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_topk(n, k, reps):
    rng = np.random.default_rng(0)
    scores = rng.standard_normal(n).astype(np.float32)
    rows = []
    out_pure = pure.topk_indices(scores, k)
    rows.append(("topk pure", bench(lambda: pure.topk_indices(scores, k), reps)))
    if native is not None:
        out_native = native.topk_indices(scores, k)
        assert np.array_equal(out_pure, out_native), "backend mismatch"
        rows.append(("topk native", bench(lambda: native.topk_indices(scores, k), reps)))
    return rows


def make_words(n):
    rng = np.random.default_rng(1)
    letters = np.array(list(string.ascii_lowercase[:6]))
    return ["".join(letters[rng.integers(0, 6, size=rng.integers(2, 12))])
            for _ in range(n)]


def bench_wordpiece(n_words, reps):
    vocab = {"a", "b", "c", "ab", "bc", "abc"}
    vocab |= {"##" + p for p in ("a", "b", "c", "ab", "bc", "de", "f")}
    words = make_words(n_words)

    def run(impl):
        return [impl.wordpiece_pieces(w, vocab, "##") for w in words]

    rows = []
    out_pure = run(pure)
    rows.append(("wordpiece pure", bench(lambda: run(pure), reps)))
    if native is not None:
        assert run(native) == out_pure, "backend mismatch"
        rows.append(("wordpiece native", bench(lambda: run(native), reps)))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller sizes")
    args = parser.parse_args()

    if args.quick:
        n_scores, n_words, reps = 100_000, 20_000, 3
    else:
        n_scores, n_words, reps = 2_000_000, 200_000, 5

    if native is None:
        print("compiled kernels unavailable; timing the pure backend only")

    rows = bench_topk(n_scores, 20, reps) + bench_wordpiece(n_words, reps)
    width = max(len(name) for name, _ in rows)
    print(f"\ntop-k over {n_scores:,} float32 scores (k=20); "
          f"wordpiece over {n_words:,} words\n")
    print(f"{'kernel'.ljust(width)}  best (ms)")
    base = {}
    for name, seconds in rows:
        kind = name.split()[0]
        base.setdefault(kind, seconds)
        speedup = base[kind] / seconds
        note = f"  ({speedup:.2f}x vs pure)" if "native" in name else ""
        print(f"{name.ljust(width)}  {1000 * seconds:9.2f}{note}")


if __name__ == "__main__":
    main()
