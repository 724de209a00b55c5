"""Time the compiled path kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--paths N] [--repeat K] [--threads T]

Both backends draw the same random numbers, so the script also checks that
their outputs agree before reporting throughput.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from solar_planner._backend import get_kernels
from solar_planner.household import CostParameters, IncomeModel


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def first_passage_case(n_paths: int):
    costs, income = CostParameters(), IncomeModel()
    r = 70_000.0
    mu = float(income.mu_of_r(r))
    barrier = np.full(n_paths, np.log(2.5))
    drift = np.full(n_paths, mu - 0.5 * income.sigma**2)
    dt = costs.t_b / 30
    n_steps = int(round(50.0 / dt))
    return (barrier, drift, income.sigma, dt, n_steps, 1, True, 0, 0), n_steps


def asian_case(n_paths: int):
    costs, income = CostParameters(), IncomeModel()
    r = 70_000.0
    args = (income.x0, float(income.mu_of_r(r)), income.sigma, costs.t_b, 10, 120,
            costs.eta / costs.t_b, float(income.lambda_of_r(r)), n_paths, 1, 0)
    return args, 10 * 120


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    py = get_kernels("python")
    try:
        comp = get_kernels("compiled")
    except ImportError:
        comp = None
        print("compiled kernels not built; timing the numpy fallback only")

    fp_args, _ = first_passage_case(args.paths)
    as_args, as_steps = asian_case(args.paths)

    rows = []
    for name, kern in (("python", py), ("compiled", comp)):
        if kern is None:
            continue
        hits = kern.first_passage_steps(*fp_args, args.threads)
        # count the steps actually taken: paths stop at their crossing
        taken = np.where(hits > 0, hits, fp_args[4]).sum()
        t_fp = _best_of(lambda: kern.first_passage_steps(*fp_args, args.threads), args.repeat)
        t_as = _best_of(lambda: kern.asian_cycle_payoffs(*as_args, threads=args.threads), args.repeat)
        rows.append((name, t_fp, taken / t_fp, t_as, args.paths * as_steps / t_as, hits))

    print(f"{'backend':<10}{'first-passage s':>17}{'Msteps/s':>10}{'asian s':>10}{'Msteps/s':>10}")
    for name, t_fp, rate_fp, t_as, rate_as, _ in rows:
        print(f"{name:<10}{t_fp:>17.3f}{rate_fp / 1e6:>10.1f}{t_as:>10.3f}{rate_as / 1e6:>10.1f}")
    if len(rows) == 2:
        same = np.array_equal(rows[0][5], rows[1][5])
        print(f"speed-up: first passage x{rows[0][1] / rows[1][1]:.1f}, asian x{rows[0][3] / rows[1][3]:.1f}; "
              f"crossing steps identical: {same}")


if __name__ == "__main__":
    main()
