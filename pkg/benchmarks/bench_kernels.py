"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from tropslag.kernels import _fallback

try:
    from tropslag.kernels import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    C = rng.normal(size=(4096, 5)) + 1j * rng.normal(size=(4096, 5))
    P = rng.normal(size=(20000, 2)) * 5
    A = rng.normal(size=(6, 2))
    U = rng.normal(size=(6, 2))
    U /= np.linalg.norm(U, axis=1)[:, None]
    L = np.array([1.0, 2.0, 3.0, np.inf, np.inf, np.inf])
    E = rng.integers(-2, 3, size=(10, 2))
    K = rng.normal(size=10) + 0j
    z = np.exp(rng.normal(size=(2, 50000)) + 1j * rng.normal(size=(2, 50000)))
    return {
        "batch_roots 4096 x deg 4": lambda m: m.batch_roots(C),
        "segment_distances 20000 x 6": lambda m: m.segment_distances(P, A, U, L),
        "laurent_eval 50000 x 10 terms": lambda m: m.laurent_eval(E, K, z[0], z[1]),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; run pip install -e . --no-build-isolation")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        tp = best_of(lambda: fn(_fallback), args.repeat)
        tc = best_of(lambda: fn(_ckernels), args.repeat)
        print(f"{name:32s} {1e3 * tp:12.2f} {1e3 * tc:12.2f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
