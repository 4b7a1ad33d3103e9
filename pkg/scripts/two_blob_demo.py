"""Quantum Lloyd's algorithm next to the classical one on Gaussian blobs.

Example:
    python scripts/two_blob_demo.py --blobs 3 --per-blob 3 --seed 1
"""

import argparse
import json

import numpy as np

from qlloyd.classical import kmeans_lloyd, kmeanspp_seeds
from qlloyd.qkmeans import CopyBudget, run_qkmeans
from qlloyd.stateprep import DataSet
from qlloyd.statevector import make_rng


def blobs(rng, count, per_blob, dim, separation, spread):
    centres = rng.normal(0, separation, size=(count, dim))
    return np.vstack([c + rng.normal(0, spread, size=(per_blob, dim)) for c in centres])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--blobs", type=int, default=2)
    parser.add_argument("--per-blob", type=int, default=4)
    parser.add_argument("--dim", type=int, default=4)
    parser.add_argument("--separation", type=float, default=3.0)
    parser.add_argument("--spread", type=float, default=0.5)
    parser.add_argument("--noise", type=float, default=0.0, help="uniform noise on each distance entry")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = make_rng(args.seed)
    points = blobs(rng, args.blobs, args.per_blob, args.dim, args.separation, args.spread)
    seeds = kmeanspp_seeds(points, args.blobs, rng)
    mode = "noisy" if args.noise > 0 else "exact"
    budget = CopyBudget(5, args.noise if args.noise > 0 else 1e-2)
    quantum = run_qkmeans(DataSet.from_vectors(points), args.blobs, seeds, budget, rng=rng, distance_mode=mode)
    classical = kmeans_lloyd(points, args.blobs, seeds)
    out = {
        "seeds": seeds,
        "quantum": quantum.report(),
        "classical": {
            "iterations": classical.iterations,
            "assignments": [int(c) for c in classical.assignment.clusters],
            "wcss": classical.assignment.wcss,
        },
        "agree": bool(np.array_equal(quantum.assignments, classical.assignment.clusters)),
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
