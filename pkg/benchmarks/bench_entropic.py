#!/usr/bin/env python3
"""Benchmark the entropic OT epoch kernel: Cython extension vs numpy fallback.

Runs the same seeded solve through both backends and reports wall time and
value agreement.  Invoke directly::

    python benchmarks/bench_entropic.py [--sizes 50,100,200,400] [--eps 0.05]
"""

from __future__ import annotations

import argparse
import importlib
import time

import numpy as np


def run_backend(backend: str, sizes: list[int], eps: float, repeats: int):
    import os

    os.environ["KMSW_BACKEND"] = backend
    import kmsw.ot.entropic as entropic

    importlib.reload(entropic)
    assert entropic.BACKEND == backend, f"backend {backend} unavailable"
    rows = []
    for n in sizes:
        rng = np.random.default_rng(1234)
        cost = rng.uniform(0.0, 1.0, (n, n))
        t0 = time.perf_counter()
        for r in range(repeats):
            pi = entropic.solve_entropic(cost, eps, rng=np.random.default_rng(99 + r))
        dt = (time.perf_counter() - t0) / repeats
        rows.append((n, dt, float((pi * cost).sum())))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="50,100,200,400")
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    results = {}
    for backend in ("numpy", "cython"):
        try:
            results[backend] = run_backend(backend, sizes, args.eps, args.repeats)
        except (AssertionError, ImportError) as exc:
            print(f"{backend}: unavailable ({exc})")

    print(f"{'n':>6} {'numpy [s]':>12} {'cython [s]':>12} {'speedup':>9} {'|dvalue|':>10}")
    for i, n in enumerate(sizes):
        t_np = results.get("numpy", [None] * len(sizes))[i]
        t_cy = results.get("cython", [None] * len(sizes))[i]
        if t_np and t_cy:
            dv = abs(t_np[2] - t_cy[2])
            print(f"{n:>6} {t_np[1]:>12.4f} {t_cy[1]:>12.4f} {t_np[1] / t_cy[1]:>8.1f}x {dv:>10.2e}")
        elif t_np:
            print(f"{n:>6} {t_np[1]:>12.4f} {'-':>12}")
        elif t_cy:
            print(f"{n:>6} {'-':>12} {t_cy[1]:>12.4f}")


if __name__ == "__main__":
    main()
