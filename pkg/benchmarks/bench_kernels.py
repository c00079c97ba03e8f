"""Time the compiled and NumPy row-set scans on the same matrices.

    python3 benchmarks/bench_kernels.py --sizes 60x2 100x2 20x4 --repeat 3
"""
from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from submx.kernels import available_backends, get_backend
from submx.matrix import sample_gaussian_matrix


def parse_size(text: str) -> tuple[int, int]:
    n, k = text.lower().split("x")
    return int(n), int(k)


def best_time(fn, W, k, repeat: int) -> tuple[float, object]:
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(W, k)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", nargs="+", type=parse_size, default=[(20, 2), (60, 2), (100, 2), (20, 4), (24, 5)],
                   help="n x k pairs, e.g. 20x2")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    names = available_backends()
    if "cython" not in names:
        print("compiled kernels not built; timing the NumPy backend only", file=sys.stderr)
    header = f"{'scan':<16}{'n':>4}{'k':>3}{'row sets':>10}" + "".join(f"{b:>12}" for b in names)
    if len(names) == 2:
        header += f"{'speedup':>10}{'agree':>7}"
    print(header)
    for n, k in args.sizes:
        W = sample_gaussian_matrix(n, args.seed).values
        for scan in ("census_scan", "global_max_scan"):
            times, outs = [], []
            for b in names:
                t, out = best_time(getattr(get_backend(b), scan), W, k, args.repeat)
                times.append(t)
                outs.append(out)
            row = f"{scan:<16}{n:>4}{k:>3}{math.comb(n, k):>10}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
            if len(names) == 2:
                row += f"{times[1] / times[0]:>9.1f}x{'yes' if _same(*outs) else 'NO':>7}"
            print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
