"""Numerical check of the ancilla-projection distance identity and the
flag-qubit small-angle law.

Prints, for random instances, D / (Z P) (which comes out as 2) and the flag
probability divided by Z t^2 / 2 and by Z^2 t^2.
"""

import argparse

import numpy as np

from qlloyd.classical import exact_distance
from qlloyd.distance import analytic_phi, flag_probability, z_value
from qlloyd.stateprep import DataSet, encode_array, labeled_superposition
from qlloyd.statevector import project_register


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--trials", type=int, default=5)
    parser.add_argument("--t", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'M':>3} {'N':>3} {'D/(Z P)':>10} {'p/(Zt^2/2)':>11} {'p/(Z^2t^2)':>11}")
    for _ in range(args.trials):
        m, n = int(rng.integers(1, 9)), int(rng.integers(2, 9))
        u, vs = rng.normal(size=n), rng.normal(size=(m, n))
        data = DataSet.from_vectors(vs)
        u_norm = float(np.linalg.norm(u))
        psi = labeled_superposition(encode_array(u), data, range(m))
        p_proj = project_register(psi, "ancilla", analytic_phi(u_norm, data.norms)).probability
        z = z_value(u_norm, data.norms)
        t = args.t / max(u_norm, data.norms.max())
        p_flag = flag_probability(u_norm, data.norms, t)
        ratio = exact_distance(u, vs.mean(axis=0)) / (z * p_proj)
        print(f"{m:>3} {n:>3} {ratio:>10.6f} {p_flag / (0.5 * z * t * t):>11.6f} {p_flag / (z * z * t * t):>11.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
