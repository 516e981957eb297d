"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--resolution 128] [--repeat 5]
"""
import argparse
import time

import numpy as np

from morseflow import _kernels_py, kernels
from morseflow.surface import build_surface, morse_function


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--resolution", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    s = build_surface("rectangle", args.resolution, [1.0, 1.0])
    e1, e2 = s.triangle_edge_vectors
    a = np.broadcast_to(np.eye(2), (s.triangle_count, 2, 2)).copy()
    scale = np.asarray(s.triangle_area_scale, dtype=np.float64)
    h, _ = morse_function(s, s.nearest_vertex([0.5, 0.5]), 0.01)
    rank = np.argsort(np.lexsort((np.arange(s.vertex_count), h.values))).astype(np.int64)
    ptr, idx, closed = s.vertex_links
    closed = np.asarray(closed, dtype=np.uint8)
    vals = np.random.default_rng(0).standard_normal(9 * s.triangle_count)
    starts = np.arange(0, len(vals), 3, dtype=np.int64)

    cases = {
        "element_matrices": (lambda m: m.element_matrices(e1, e2, a, scale)),
        "lower_link_runs": (lambda m: m.lower_link_runs(rank, ptr, idx, closed)),
        "segment_sum": (lambda m: m.segment_sum(vals, starts)),
    }
    if kernels.BACKEND != "compiled":
        print("compiled extension not available; only the fallback is timed")
    print(f"surface: {s.vertex_count} vertices, {s.triangle_count} triangles")
    print(f"{'kernel':18s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s}")
    for name, fn in cases.items():
        tp = _best(lambda: fn(_kernels_py), args.repeat)
        if kernels.BACKEND == "compiled":
            from morseflow import _kernels

            tc = _best(lambda: fn(_kernels), args.repeat)
            print(f"{name:18s} {tp * 1e3:12.2f} {tc * 1e3:14.2f} {tp / tc:8.1f}")
        else:
            print(f"{name:18s} {tp * 1e3:12.2f} {'-':>14s} {'-':>8s}")


if __name__ == "__main__":
    main()
