"""Compare the numba and numpy estimator kernels, and check the scenario budget.

    python benchmarks/bench_kernels.py [--reps 10000] [--K 30] [--n 1000]

Exits non-zero if a full scenario (data generation + all estimators) takes
longer than the 5 s budget on the active backend.
"""

import argparse
import sys
import time

import numpy as np

from lorsim import _accel
from lorsim.datagen import Scenario
from lorsim.engine import _simulate_arrays, simulate_block
from lorsim.estimators import effective_sizes, estimate_batch, summarize_arrays
from lorsim.sizes import SampleSizeSpec

BUDGET_S = 5.0


def best_of(fn, repeat=3):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--K", type=int, default=30)
    p.add_argument("--n", type=int, default=1000)
    args = p.parse_args(argv)

    sc = Scenario(args.K, SampleSizeSpec("uniform", args.n), 0.5, 0.4, 0.1, 0.4, "RIM1")
    n, x_C, x_T = _simulate_arrays(sc, 0, args.reps, 1)
    y, v, _ = summarize_arrays(x_C, n, x_T, n)
    wn = effective_sizes(n, n)

    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    print(f"batch: M={args.reps} K={args.K}  (active backend: {_accel.backend_name()})")
    results = {}
    for b in backends:
        estimate_batch(y[:4], v[:4], wn[:4], backend=b)  # compile / warm up
        results[b] = best_of(lambda: estimate_batch(y, v, wn, backend=b))
        print(f"  estimators  {b:<6s} {results[b] * 1e3:9.1f} ms")
    if "numba" in results:
        print(f"  speed-up numba/numpy: {results['numpy'] / results['numba']:.1f}x")

    t_gen = best_of(lambda: _simulate_arrays(sc, 0, args.reps, 1), repeat=1)
    print(f"  data generation        {t_gen * 1e3:9.1f} ms")
    ok = True
    for b in backends:
        t = best_of(lambda: simulate_block(sc, 0, args.reps, 1, backend=b), repeat=1)
        status = "ok" if t < BUDGET_S else "OVER BUDGET"
        print(f"  full scenario {b:<6s}   {t * 1e3:9.1f} ms  [{status}, budget {BUDGET_S:.0f} s]")
        if b == _accel.backend_name():
            ok = t < BUDGET_S
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
