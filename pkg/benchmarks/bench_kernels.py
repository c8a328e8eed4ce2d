"""Time the compiled and pure-numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--sizes 100 300 1000] [--degree 20] [--repeat 20]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from linksparse import generate_ba, kernels


def cases(g, rng):
    n = g.vertex_count
    w = rng.gamma(2.0, 100.0, n)
    active = rng.random(n) < 0.7
    backoff = rng.integers(0, 32, n)
    x = rng.normal(size=(n, 8))
    return {
        "lgs_rounds": lambda b: kernels.lgs_rounds(g.indptr, g.indices, w, active, backend=b),
        "csma_contend": lambda b: kernels.csma_contend(g.indptr, g.indices, active, backoff, backend=b),
        "laplacian_apply": lambda b: kernels.laplacian_apply(g.indptr, g.indices, g.inv_sqrt_degrees, x, backend=b),
        "induced_degrees": lambda b: kernels.induced_degrees(g.indptr, g.indices, active, backend=b),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000])
    ap.add_argument("--degree", type=float, default=20.0, help="average conflict degree (BA, m = degree/2)")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (active: {kernels.BACKEND})")
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is timed")
    rng = np.random.default_rng(0)
    header = f"{'kernel':<16} {'n':>6} " + " ".join(f"{b + ' ms':>12}" for b in backends)
    print(header + ("  speedup" if len(backends) > 1 else ""))
    for n in args.sizes:
        g = generate_ba(n, args.degree / 2, seed=n)
        for name, fn in cases(g, rng).items():
            times = []
            for b in backends:
                fn(b)
                t = min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
                times.append(t * 1e3)
            line = f"{name:<16} {n:>6} " + " ".join(f"{t:>12.3f}" for t in times)
            if len(times) > 1:
                line += f"  {times[backends.index('python')] / times[backends.index('cython')]:>6.1f}x"
            print(line)


if __name__ == "__main__":
    main()
