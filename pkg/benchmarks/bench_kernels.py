"""Wall-clock comparison of the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--paths 20000] [--repeat 3]

Compilation is triggered once before timing.  Results are checked for
agreement so a fast but wrong kernel cannot win.
"""

import argparse
import time

import numpy as np

from hormander import mmatrix as MM
from hormander import norris as NR
from hormander import scenarios
from hormander.rng import normals
from hormander.sde import GridSpec, simulate_ensemble


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(paths):
    lv = scenarios.langevin(quartic=1.0)
    etas = MM.eta_directions(2, K=4)
    spec = GridSpec(1.0, 128)

    def ensemble(backend):
        return simulate_ensemble(lv.system, lv.x0, spec, paths, 1, etas=etas, backend=backend).C

    samples = normals(2, np.arange(paths * 10), 1, 1).ravel()
    grid = np.linspace(-4, 4, 401)

    def kde(backend):
        return MM.kde_density(samples, 0.05, grid, backend)

    f = np.cumsum(np.random.default_rng(0).normal(size=2048)) / 45.0

    def holder(backend):
        return NR.holder_constant(f, NR.ALPHA, backend=backend)

    return {"ensemble (langevin quartic, N=128)": ensemble, "kde (401 points)": kde,
            "hoelder constant (2048 points)": holder}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':40s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, fn in cases(args.paths).items():
        fn("numba")  # compile
        tn, a = best_of(lambda: fn("numba"), args.repeat)
        tp, b = best_of(lambda: fn("numpy"), args.repeat)
        if not np.allclose(a, b, rtol=1e-10, atol=1e-14):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:40s} {tn:10.3f} {tp:10.3f} {tp / tn:8.1f}x")


if __name__ == "__main__":
    main()
