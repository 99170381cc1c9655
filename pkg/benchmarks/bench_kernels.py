"""Compiled kernels against the numpy fallback.

Times the reaction flow and the tridiagonal solve at several grid sizes, and
a full pure_exp blow-up run (n=1, bump a=4, J=800) with each backend.

    python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from blowuplab import backend
from blowuplab.acceptance import blowup_run
from blowuplab.nonlin import make_builtin
from blowuplab.pde import RadialGrid, RadialSolver
from blowuplab.resolvent import ResolventTable


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def solver_with(kernels, J):
    fam = make_builtin("power_log")
    grid = RadialGrid.make(1, 1.0, J)
    return RadialSolver(grid, fam, ResolventTable(fam), kernels=kernels), grid


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    try:
        compiled = backend.get("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    python = backend.get("python")
    rng = np.random.default_rng(0)

    print(f"{'kernel':<16}{'J':>7}{'compiled [ms]':>16}{'python [ms]':>14}{'speed-up':>10}")
    for J in (200, 800, 3200):
        u = 4.0 + rng.uniform(0.0, 8.0, J + 1)
        times = []
        for k in (compiled, python):
            solver, _ = solver_with(k, J)
            times.append(best_of(lambda: solver.react(u, 1e-5), args.repeat))
        print(f"{'reaction_flow':<16}{J:>7}{1e3 * times[0]:>16.3f}{1e3 * times[1]:>14.3f}{times[1] / times[0]:>10.1f}")
        lower, upper = -np.ones(J + 1), -np.ones(J + 1)
        diag, rhs = 2.5 * np.ones(J + 1), rng.normal(size=J + 1)
        times = [best_of(lambda: k.solve_tridiag(lower, diag, upper, rhs), args.repeat) for k in (compiled, python)]
        print(f"{'solve_tridiag':<16}{J:>7}{1e3 * times[0]:>16.3f}{1e3 * times[1]:>14.3f}{times[1] / times[0]:>10.1f}")

    times = []
    for k in (compiled, python):
        t0 = time.perf_counter()
        run, _ = blowup_run("pure_exp", keep_history=False, kernels=k)
        times.append(time.perf_counter() - t0)
        steps = run.t.size - 1
    print(f"{'full run':<16}{800:>7}{1e3 * times[0]:>16.1f}{1e3 * times[1]:>14.1f}{times[1] / times[0]:>10.1f}   ({steps} steps)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
