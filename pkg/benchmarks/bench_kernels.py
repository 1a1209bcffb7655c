"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Kernel timings use ``kernels.PAIRS`` directly, so both paths are measured in
one process regardless of ``SRFB_DISABLE_JIT``.  ``--end-to-end`` also times
a short solver run in two subprocesses, one per backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from srfb import kernels
from srfb._jit import USE_NUMBA


def cases(rng):
    small, big = 4, 4096
    yield "clip_box", small, (rng.normal(size=small), -np.ones(small), np.ones(small))
    yield "clip_box", big, (rng.normal(size=big), -np.ones(big), np.ones(big))
    yield "project_ball", small, (rng.normal(size=small) * 3, np.zeros(small), 1.0)
    yield "relax", small, (rng.normal(size=small), rng.normal(size=small), 0.7)
    yield "adam_update", small, (rng.normal(size=small), np.zeros(small), np.zeros(small),
                                 rng.normal(size=small), 0.5, 0.9, 3, 1e-3, 1e-8)
    for rows in (1, 64, 32768):
        yield "batch_moments", rows, (rng.normal(size=small), rng.standard_normal((rows, small)), False, 1.0)
    for rows in (1025, 4096):
        yield "gap_max", rows, (rng.normal(size=(rows, 2)), rng.normal(size=(rows, 2)), rng.normal(size=2))


def time_call(fn, args, repeat):
    fn(*args)  # warm-up, includes JIT compilation
    n, _ = timeit.Timer(lambda: fn(*args)).autorange()
    best = min(timeit.repeat(lambda: fn(*args), number=n, repeat=repeat))
    return best / n


END_TO_END = """
import time, numpy as np
from srfb import backend
from srfb.games import make_bilinear_saddle
from srfb.core import Ball
from srfb.sampling import StochasticOracle, NoiseModel, SA
from srfb.solvers import SolverConfig, run_solver
g = make_bilinear_saddle([[1.0]], Ball([0, 0], 2.0))
cfg = SolverConfig("SRFB", lam=0.05, delta=0.7, max_iters=5000)
run_solver(g, StochasticOracle(g, NoiseModel(sigma=0.5), SA(8), seed=0), cfg, x0=[1, 0])
t = time.perf_counter()
run_solver(g, StochasticOracle(g, NoiseModel(sigma=0.5), SA(8), seed=0), cfg, x0=[1, 0])
print(backend(), time.perf_counter() - t)
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()
    if not USE_NUMBA:
        sys.exit("numba path unavailable (numba missing or SRFB_DISABLE_JIT set)")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<15}{'size':>8}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, size, inputs in cases(rng):
        nb, ref = kernels.PAIRS[name]
        t_nb = time_call(nb, inputs, args.repeat)
        t_np = time_call(ref, inputs, args.repeat)
        print(f"{name:<15}{size:>8}{t_nb * 1e6:>12.2f}{t_np * 1e6:>12.2f}{t_np / t_nb:>9.1f}x")

    if args.end_to_end:
        print("\nSRFB, 5000 iterations, SA batch 8:")
        for flag in ("0", "1"):
            env = dict(os.environ, SRFB_DISABLE_JIT=flag)
            out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                                 text=True, check=True)
            name, secs = out.stdout.split()
            print(f"  {name:<6} {float(secs):.3f} s")


if __name__ == "__main__":
    main()
