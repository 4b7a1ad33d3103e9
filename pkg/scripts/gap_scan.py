"""Ground-space probability and minimum gap of the seed search versus total time.

Example:
    python scripts/gap_scan.py --m 4 --k 2 --taus 10 50 200 400
"""

import argparse
import csv
import sys

import numpy as np

from qlloyd.adiabatic import DistanceMatrix, Schedule, ground_space_probability, run_adiabatic, seed_problem


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--m", type=int, default=4)
    parser.add_argument("--k", type=int, default=2)
    parser.add_argument("--dim", type=int, default=3, help="vector dimension of the random fixture")
    parser.add_argument("--taus", type=float, nargs="+", default=[10, 50, 100, 200, 400])
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    D = DistanceMatrix.from_vectors(np.random.default_rng(args.seed).normal(size=(args.m, args.dim)))
    problem = seed_problem(D, args.k)
    writer = csv.writer(sys.stdout)
    writer.writerow(["interpolation", "tau", "ground_probability", "min_gap", "argmin_s"])
    for interp in ("linear", "smooth"):
        for tau in args.taus:
            run = run_adiabatic(problem, Schedule(tau, args.steps, interp))
            p = ground_space_probability(run.final, problem.hf)
            writer.writerow([interp, tau, f"{p:.8f}", f"{run.trace.min_gap:.3e}", f"{run.trace.argmin_s:.4f}"])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
