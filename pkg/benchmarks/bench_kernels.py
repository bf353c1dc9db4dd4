"""Compiled vs numpy kernels on the max-load partition and rectangular queries.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from maxload import _pykernels

try:
    from maxload import _ckernels
except ImportError:  # extension not built
    _ckernels = None

CASES = [(4, 10), (10, 50), (10, 200), (25, 200)]


def _q(k: int, seed: int = 0) -> np.ndarray:
    v = np.sort(np.random.default_rng(seed).uniform(0.1, 2.0, k))[::-1]
    return v / (1.0 + np.cumsum(v[::-1])[::-1])


def bench(repeat: int) -> None:
    backends = {"numpy": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'kernel':<22}{'k':>4}{'T':>6}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for k, T in CASES:
        q = _q(k)
        lower = np.zeros(k, dtype=np.int64)
        upper = np.full(k, max(1, T // k), dtype=np.int64)
        for name, call in (
            ("max_load_partition", lambda m: m.max_load_partition(q, T)),
            ("rectangular", lambda m: m.rectangular_probability(q, T, lower, upper)),
        ):
            times = {b: min(timeit.repeat(lambda: call(m), number=1, repeat=repeat)) for b, m in backends.items()}
            speed = times["numpy"] / times["cython"] if "cython" in times else float("nan")
            cols = "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
            print(f"{name:<22}{k:>4}{T:>6}{cols}{speed:>9.1f}x")
    if _ckernels is None:
        print("compiled extension unavailable; only the numpy backend was timed")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    bench(ap.parse_args().repeat)
