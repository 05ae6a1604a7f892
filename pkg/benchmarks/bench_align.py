#!/usr/bin/env python3
"""Benchmark the compiled Levenshtein kernel against the pure-Python twin.

The DP table fill dominates rule learning and edit-based scoring, so this is
the number that decides whether building the extension is worth it on a
given box.

Usage: python benchmarks/bench_align.py [--pairs 2000] [--min-len 10] [--max-len 40]
"""

import argparse
import random
import statistics
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from rewritekit import _levkernel_py  # noqa: E402

try:
    from rewritekit import _levkernel  # noqa: E402

    HAVE_COMPILED = True
except ImportError:
    _levkernel = None
    HAVE_COMPILED = False


def make_pairs(n_pairs, min_len, max_len, vocab_size, seed):
    rng = random.Random(seed)
    pairs = []
    for _ in range(n_pairs):
        n = rng.randint(min_len, max_len)
        m = rng.randint(min_len, max_len)
        a = [rng.randrange(vocab_size) for _ in range(n)]
        # Target: mutated copy, like real parallel data.
        b = list(a[:m]) if m <= n else a + [rng.randrange(vocab_size) for _ in range(m - n)]
        for _ in range(rng.randint(0, max(1, m // 4))):
            if b:
                b[rng.randrange(len(b))] = rng.randrange(vocab_size)
        pairs.append((a, b))
    return pairs


def bench(kernel, pairs, repeats):
    times = []
    checksum = 0
    for _ in range(repeats):
        start = time.perf_counter()
        for a, b in pairs:
            dp = kernel.dp_table(a, b)
            checksum ^= dp[len(a) * (len(b) + 1) + len(b)]
        times.append(time.perf_counter() - start)
    return min(times), statistics.median(times), checksum


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=2000)
    parser.add_argument("--min-len", type=int, default=10)
    parser.add_argument("--max-len", type=int, default=40)
    parser.add_argument("--vocab", type=int, default=500)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    pairs = make_pairs(args.pairs, args.min_len, args.max_len, args.vocab, args.seed)
    cells = sum((len(a) + 1) * (len(b) + 1) for a, b in pairs)
    print(f"{args.pairs} pairs, {cells / 1e6:.1f}M DP cells, best of {args.repeats}")

    py_best, py_med, py_sum = bench(_levkernel_py, pairs, args.repeats)
    print(f"pure python : {py_best:8.3f}s  ({cells / py_best / 1e6:7.1f} Mcells/s)")

    if not HAVE_COMPILED:
        print("compiled    : not built (run: python setup.py build_ext --inplace)")
        return
    cy_best, cy_med, cy_sum = bench(_levkernel, pairs, args.repeats)
    print(f"compiled    : {cy_best:8.3f}s  ({cells / cy_best / 1e6:7.1f} Mcells/s)")
    assert py_sum == cy_sum, "kernels disagree on distances"
    print(f"speedup     : {py_best / cy_best:8.1f}x (outputs identical)")


if __name__ == "__main__":
    main()
