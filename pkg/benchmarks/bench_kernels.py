"""Time each compiled kernel against its pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both variants are imported side by side (``*_nb`` and ``*_np``), so the
GRIDSHED_DISABLE_NUMBA flag does not matter here. The first numba call is
a warm-up and excluded from the timings.
"""

import argparse
import time

import numpy as np

from gridshed import kernels
from gridshed._accel import HAVE_NUMBA


def _cases(rng):
    x = rng.normal(size=(200, 6))
    c = rng.normal(size=(8, 6))
    aim = rng.uniform(0, 5, size=(3648, 55))
    totals = aim.sum(axis=1) * rng.uniform(0.8, 1.2, size=3648)
    w = rng.normal(size=3000)
    ar = np.array([0.5, -0.2])
    ma = np.zeros(25)
    ma[0], ma[23], ma[24] = 0.3, -0.6, -0.18
    batch = rng.normal(size=(32, 6))
    d2 = kernels.sq_distances_np(x[:120], x[:120])
    cov = np.cov(rng.normal(size=(55, 29)), rowvar=False)
    return {
        "project_simplex_rows": lambda f: f(aim, totals),
        "css_residuals": lambda f: f(w, ar, ma, 2),
        "sq_distances": lambda f: f(x, c),
        "assign_nearest": lambda f: f(x, c),
        "minibatch_step": lambda f: f(batch, c.copy(), np.ones(8)),
        "ward_merges": lambda f: f(d2),
        "jacobi_eigh": lambda f: f(cov, 1e-15, 100),
    }


def _time(call, fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        call(fn)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<22}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}")
    for name, call in _cases(rng).items():
        t_np = _time(call, getattr(kernels, f"{name}_np"), args.repeat)
        if HAVE_NUMBA:
            fn = getattr(kernels, f"{name}_nb")
            call(fn)  # compile
            t_nb = _time(call, fn, args.repeat)
            print(f"{name:<22}{t_np * 1e3:>11.3f}{t_nb * 1e3:>11.3f}{t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<22}{t_np * 1e3:>11.3f}{'n/a':>11}{'':>9}")


if __name__ == "__main__":
    main()
