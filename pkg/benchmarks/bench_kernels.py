"""Time the compiled and numpy kernel backends on the disc-to-disc problem.

    python3 benchmarks/bench_kernels.py [--spacing 0.015625] [--repeat 200]

Reports microseconds per call for the interior right-hand side, one boundary
sweep and one full explicit step, for every operator branch, and checks the
two backends agree on the right-hand side.
"""

import argparse
import math
import time

import numpy as np

from lagflow import kernels
from lagflow.domains import ConvexDomain
from lagflow.flow import FlowProblem, build_grid, quadratic_initial
from lagflow.operators import SpectralOperator

TAUS = {"log": math.pi / 8, "inverse": math.pi / 4, "arctan": 3 * math.pi / 8, "pure": math.pi / 2}


def _time(fn, repeat):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat * 1e6


def bench(spacing, repeat, threads):
    disc = ConvexDomain.disc()
    grid = build_grid(disc, spacing)
    # a mildly non-quadratic start so the sweep has work to do
    u0 = quadratic_initial(disc, disc)
    vals = grid.sample(lambda x: u0(x) + 0.01 * np.exp(-(x[..., 0] ** 2 + x[..., 1] ** 2) / 0.08))
    counts = grid.counts()
    print(f"spacing {spacing!r}: {counts['interior']} interior, {counts['boundary']} boundary nodes")
    print(f"{'branch':<8} {'backend':<9} {'rhs us':>10} {'sweep us':>10} {'step us':>10}")
    for name, tau in TAUS.items():
        rhs = {}
        for backend in sorted(kernels.BACKENDS):
            prob = FlowProblem(grid, disc, SpectralOperator(tau), backend=backend, threads=threads)
            state = prob.initial_state(vals)
            flat = np.ascontiguousarray(state.values.ravel())
            t_rhs = _time(lambda: prob._rhs(flat), repeat)
            t_sweep = _time(lambda: prob._sweep(flat.copy()), repeat)
            t_step = _time(lambda: prob.step(state), max(1, repeat // 4))
            rhs[backend] = prob._rhs(flat)[0]
            print(f"{name:<8} {backend:<9} {t_rhs:>10.1f} {t_sweep:>10.1f} {t_step:>10.1f}")
        if len(rhs) == 2:
            diff = float(np.max(np.abs(rhs["compiled"] - rhs["python"])))
            print(f"{'':<8} max |rhs compiled - rhs python| = {diff:.3e}")


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--spacing", type=float, default=1.0 / 64)
    p.add_argument("--repeat", type=int, default=200)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    if "compiled" not in kernels.BACKENDS:
        print("compiled backend not built; only the numpy backend is timed")
    bench(args.spacing, args.repeat, args.threads)


if __name__ == "__main__":
    main()
