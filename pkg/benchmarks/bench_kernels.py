"""Compare the compiled kernels against the pure numpy fallbacks.

Run: python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from feqtee.kernels import pure

try:
    from feqtee.kernels import _speedups as compiled
except ImportError:
    compiled = None


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dtw(rng):
    a = rng.uniform(-1, 1, size=(48, 2))
    b = rng.uniform(-1, 1, size=(40, 2))
    return {
        "pure": timeit(lambda: pure.dtw_cyclic(a, b)),
        "compiled": timeit(lambda: compiled.dtw_cyclic(a, b))
        if compiled else None,
    }


def bench_edge_weights(rng):
    loop = rng.uniform(-1, 1, size=(40, 2))
    edges = rng.uniform(-1, 1, size=(400, 2, 2))
    return {
        "pure": timeit(lambda: pure.edge_weights(edges, loop, 5)),
        "compiled": timeit(lambda: compiled.edge_weights(edges, loop, 5))
        if compiled else None,
    }


def main():
    rng = np.random.default_rng(0)
    rows = {
        "dtw_cyclic (48x40, all rotations)": bench_dtw(rng),
        "edge_weights (400 edges, 40 segs, k=5)": bench_edge_weights(rng),
    }
    print(f"{'kernel':<42}{'pure':>12}{'compiled':>12}{'speedup':>10}")
    for name, row in rows.items():
        p = row["pure"]
        c = row["compiled"]
        if c is None:
            print(f"{name:<42}{p * 1e3:>10.3f}ms{'n/a':>12}{'':>10}")
        else:
            print(f"{name:<42}{p * 1e3:>10.3f}ms{c * 1e3:>10.3f}ms"
                  f"{p / c:>9.1f}x")
    if compiled is None:
        print("\ncompiled kernels unavailable; showing fallback only")


if __name__ == "__main__":
    main()
