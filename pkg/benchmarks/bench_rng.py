"""Throughput of the compiled Philox kernel against the numpy fallback.

Run ``python3 benchmarks/bench_rng.py [--paths N] [--count K] [--repeat R]``.
Also times a full ``m_synthesis`` chunk, where the RNG is one stage among
several, so the end-to-end effect of the backend is visible.
"""
import argparse
import timeit

import numpy as np

from fwnoise import fbmgen, rng
from fwnoise.frackernel import HurstModel


def best_of(func, repeat):
    return min(timeit.repeat(func, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=4096)
    ap.add_argument("--count", type=int, default=1310)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = ["python"] + (["cython"] if rng._compiled is not None else [])
    n_values = args.paths * args.count
    print(f"normals: {args.paths} paths x {args.count} values, best of {args.repeat}")
    times = {}
    for name in backends:
        t = best_of(lambda: rng.normals(1, rng.Stream.AUX, 0, args.paths, args.count,
                                        backend=name), args.repeat)
        times[name] = t
        print(f"  {name:7s} {t * 1e3:9.1f} ms  {n_values / t / 1e6:8.1f} M normals/s")
    if len(times) == 2:
        a = rng.normals(1, rng.Stream.AUX, 0, 64, args.count, backend="python")
        b = rng.normals(1, rng.Stream.AUX, 0, 64, args.count, backend="cython")
        print(f"  speedup {times['python'] / times['cython']:.1f}x, "
              f"outputs identical: {np.array_equal(a, b)}")

    model = HurstModel(0.75)
    grid = fbmgen.TimeGrid(1.0, 1025)
    fbmgen.generate_via_m(model, grid, 1, 0)  # build the cached weights first
    t = best_of(lambda: fbmgen.generate_via_m(model, grid, args.paths, 0), args.repeat)
    print(f"m_synthesis chunk of {args.paths} paths, n=1025, backend {rng.BACKEND}: "
          f"{t * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
