"""Statevector simulation of quantum distance estimation, adiabatic seeding
and clustering, and an adiabatic Lloyd's algorithm, with classical oracles."""

from .adiabatic import DistanceMatrix, Schedule, run_adiabatic
from .classical import kmeans_lloyd, kmeanspp_seeds
from .distance import assign_two_class, distance_to_centroid, swap_test
from .qkmeans import CopyBudget, run_qkmeans
from .stateprep import DataSet, QueryLedger, load_csv
from .statevector import HermitianOperator, Register, StateVector, make_rng

__all__ = [
    "CopyBudget", "DataSet", "DistanceMatrix", "HermitianOperator", "QueryLedger", "Register",
    "Schedule", "StateVector", "assign_two_class", "distance_to_centroid", "kmeans_lloyd",
    "kmeanspp_seeds", "load_csv", "make_rng", "run_adiabatic", "run_qkmeans", "swap_test",
]
