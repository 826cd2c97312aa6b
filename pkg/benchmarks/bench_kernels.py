"""Time the compiled and pure-Python Gram enumeration kernels side by side.

    python benchmarks/bench_kernels.py [--repeat 3]

Both kernels must agree on every extremum before a timing is reported.
"""

import argparse
import time
from math import comb

import numpy as np

from pertcs import _enum_py

try:
    from pertcs._kernels import gram_extremes as compiled
except ImportError:
    compiled = None

CASES = [(16, 40, 2), (16, 40, 3), (20, 32, 4), (32, 64, 3), (30, 30, 6)]


def best_time(fn, G, K, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(G, K, 1e-14)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'m':>4} {'n':>4} {'K':>3} {'subsets':>10} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for m, n, K in CASES:
        A = rng.normal(size=(m, n)) / np.sqrt(m)
        G = np.ascontiguousarray(A.T @ A)
        tp, op = best_time(_enum_py.gram_extremes, G, K, args.repeat)
        if compiled is None:
            print(f"{m:>4} {n:>4} {K:>3} {comb(n, K):>10} {tp:>10.4f} {'n/a':>10} {'n/a':>8}")
            continue
        tc, oc = best_time(compiled, G, K, args.repeat)
        assert np.isclose(op[0], oc[0], rtol=1e-12) and np.isclose(op[2], oc[2], atol=1e-12)
        print(f"{m:>4} {n:>4} {K:>3} {comb(n, K):>10} {tp:>10.4f} {tc:>10.4f} {tp / tc:>8.1f}")


if __name__ == "__main__":
    main()
