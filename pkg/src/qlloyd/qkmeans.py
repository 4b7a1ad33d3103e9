"""Adiabatic quantum Lloyd's algorithm.

The clustering state lives on a ``cluster`` register (k levels) and a
``label`` register (M levels):

    |chi> = M**-0.5 sum_j |c_j>|j>

Each step starts from the uniform superposition over (cluster, label),
deforms ``(1 - |phi><phi|) x I`` (phi uniform over clusters) into the
diagonal cost ``sum_{c,j} |v_j - center_c|^2 |c><c| x |j><j|``, and so rotates
every label's cluster register toward its nearest center. The label register
is a spectator: each label block evolves on its own.

Centers come from the seeds at the first step and from the decoded
assignment's means afterwards. Assignments are decoded by sampling the
cluster register for each label and taking the majority (ties to the lowest
cluster index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .adiabatic import AdiabaticProblem, GapTrace, Schedule, run_adiabatic
from .classical import kmeanspp_seeds, update_centroids, wcss
from .distance import swap_test
from .errors import DataError, RegisterError
from .stateprep import DataSet
from .statevector import HermitianOperator, Register, Rng, StateVector, make_rng, sample_register

CONVERGENCE_TOL = 1e-6
DEFAULT_SCHEDULE = Schedule(300.0, 3000, "smooth")


@dataclass(frozen=True)
class CopyBudget:
    """Copies of the previous clustering state per step and the distance accuracy."""

    d: int = 5
    delta: float = 1e-2

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")

    @property
    def usable(self) -> bool:
        """Whether copies can be reused: requires delta > d**(-2/3)."""
        return self.delta > self.d ** (-2 / 3)


@dataclass(frozen=True, eq=False)
class ClusteringState:
    state: StateVector
    iteration: int
    leakage: float
    target: np.ndarray  # nearest-center cluster per label for this step's cost table
    trace: GapTrace | None = field(default=None, repr=False)
    centers: np.ndarray | None = field(default=None, repr=False)
    reseeded: tuple = ()

    @property
    def k(self) -> int:
        return self.state.register("cluster").dimension

    @property
    def M(self) -> int:
        return self.state.register("label").dimension

    @property
    def min_gap(self) -> float:
        return self.trace.min_gap if self.trace is not None else math.nan

    def label_marginal(self) -> np.ndarray:
        return self.state.marginal("label")

    def conditional(self) -> np.ndarray:
        """(M, k) table of P(cluster | label)."""
        joint = self.state.marginal(["label", "cluster"])
        return joint / joint.sum(axis=1, keepdims=True)


@dataclass
class IterationRecord:
    iteration: int
    assignments: np.ndarray
    cluster_sizes: np.ndarray
    size_errors: np.ndarray
    fidelity: float | None
    min_gap: float
    wcss: float
    leakage: float
    reseeded: tuple = ()


@dataclass(eq=False)
class QKMeansResult:
    final: ClusteringState
    history: list[IterationRecord]
    seeds: list[int]
    converged: bool

    @property
    def assignments(self) -> np.ndarray:
        return self.history[-1].assignments

    @property
    def wcss(self) -> float:
        return self.history[-1].wcss

    def report(self) -> dict:
        def _num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "iterations": len(self.history),
            "assignments": [int(c) for c in self.assignments],
            "cluster_sizes": [float(x) for x in self.history[-1].cluster_sizes],
            "wcss": float(self.wcss),
            "converged": bool(self.converged),
            "gap_min_per_iter": [_num(r.min_gap) for r in self.history],
        }


def clustering_registers(k: int, m: int) -> tuple[Register, Register]:
    return Register("cluster", k), Register("label", m)


def clustering_state(assignments, k: int) -> StateVector:
    """Ideal ``M**-0.5 sum_j |c_j>|j>`` for a given assignment."""
    assignments = np.asarray(assignments, dtype=int)
    m = assignments.size
    amps = np.zeros((k, m), dtype=complex)
    amps[assignments, np.arange(m)] = 1 / np.sqrt(m)
    return StateVector(clustering_registers(k, m), amps.reshape(-1))


def center_costs(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(k, M) table of ``|v_j - center_c|^2``."""
    diff = centers[:, None, :] - points[None, :, :]
    return np.sum(np.abs(diff) ** 2, axis=-1)


def assignment_problem(costs: np.ndarray) -> AdiabaticProblem:
    k, m = costs.shape
    cluster, label = clustering_registers(k, m)
    phi = np.full(k, 1 / np.sqrt(k))
    h0 = np.kron(np.eye(k) - np.outer(phi, phi), np.eye(m))
    start = StateVector((cluster, label), np.full(k * m, 1 / np.sqrt(k * m), dtype=complex))
    return AdiabaticProblem(
        HermitianOperator.from_matrix((cluster, label), h0),
        HermitianOperator.from_diagonal((cluster, label), costs.reshape(-1)),
        start,
        spectator="label",
    )


def align_label_phases(state: StateVector, target: np.ndarray) -> StateVector:
    """Remove the dynamical phase each label block picks up during the sweep.

    A diagonal phase on the label register makes every label's amplitude on
    its target cluster real and positive. Probabilities are untouched.
    """
    amps = state.tensor()
    m = amps.shape[1]
    pivot = amps[target, np.arange(m)]
    phase = np.where(np.abs(pivot) > 0, np.conj(pivot) / np.where(pivot == 0, 1, np.abs(pivot)), 1.0)
    return StateVector(state.layout, (amps * phase[None, :]).reshape(-1))


def _assign(costs: np.ndarray, schedule: Schedule, iteration: int, centers, reseeded=()) -> ClusteringState:
    run = run_adiabatic(assignment_problem(costs), schedule)
    target = np.argmin(costs, axis=0)
    final = align_label_phases(run.final, target)
    probs = final.probabilities().reshape(costs.shape)
    on_target = probs[target, np.arange(costs.shape[1])].sum()
    leakage = float(min(max(1.0 - on_target, 0.0), 1.0))
    return ClusteringState(final, iteration, leakage, target, run.trace, centers, tuple(reseeded))


def first_clustering(data: DataSet, seeds, schedule: Schedule = DEFAULT_SCHEDULE) -> ClusteringState:
    """Correlate every label with its nearest seed vector."""
    seeds = [data.check_label(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise DataError(f"seeds must be distinct, got {seeds}")
    if len(seeds) > data.M:
        raise DataError("more seeds than vectors")
    points = data.vectors
    centers = points[seeds]
    return _assign(center_costs(points, centers), schedule, 0, centers)


def decode_assignments(cs: ClusteringState, shots: int, rng: Rng) -> np.ndarray:
    """Majority cluster per label from ``shots // M`` conditional samples each."""
    per_label = max(1, shots // cs.M)
    cond = cs.conditional()
    out = np.empty(cs.M, dtype=int)
    for j in range(cs.M):
        counts = rng.multinomial(per_label, cond[j] / cond[j].sum())
        out[j] = int(np.argmax(counts))
    return out


def recluster_step(
    current: ClusteringState,
    data: DataSet,
    budget: CopyBudget = CopyBudget(),
    schedule: Schedule = DEFAULT_SCHEDULE,
    shots: int = 10_000,
    rng: Rng | None = None,
    assignments=None,
    distance_mode: str = "exact",
) -> ClusteringState:
    """One Lloyd iteration: centers from the current assignment, then re-assign.

    ``distance_mode="noisy"`` perturbs every cost entry by uniform noise of
    size ``budget.delta``, standing in for finite-accuracy distance estimates.
    """
    if current.leakage >= 0.5:
        raise ValueError(f"leakage {current.leakage:.3f} is too high to decode assignments")
    if distance_mode not in ("exact", "noisy"):
        raise ValueError("distance_mode must be 'exact' or 'noisy'")
    rng = make_rng(0) if rng is None else rng
    if assignments is None:
        assignments = decode_assignments(current, shots, rng)
    points = data.vectors
    centers, events = update_centroids(points, assignments, current.k)
    costs = center_costs(points, centers)
    if distance_mode == "noisy":
        costs = np.clip(costs + rng.uniform(-budget.delta, budget.delta, size=costs.shape), 0.0, None)
    return _assign(costs, schedule, current.iteration + 1, centers, events)


def estimate_cluster_sizes(cs: ClusteringState, shots: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    """``M_c = M * freq(c)`` from sampling the cluster register, with binomial standard errors."""
    hist = sample_register(cs.state, "cluster", shots, rng)
    freq = np.array([hist.get(c, 0) for c in range(cs.k)], dtype=float) / shots
    return cs.M * freq, cs.M * np.sqrt(freq * (1 - freq) / shots)


def convergence_check(prev: ClusteringState, nxt: ClusteringState, tol: float = CONVERGENCE_TOL) -> tuple[float, bool]:
    if prev.state.layout != nxt.state.layout:
        raise RegisterError("clustering states have different layouts")
    fid = swap_test(prev.state, nxt.state, "exact").overlap
    return fid, fid >= 1 - tol


def _record(cs: ClusteringState, data: DataSet, shots: int, rng: Rng, fid, assignments) -> IterationRecord:
    sizes, errs = estimate_cluster_sizes(cs, shots, rng)
    means, _ = update_centroids(data.vectors, assignments, cs.k)
    return IterationRecord(cs.iteration, assignments, sizes, errs, fid, cs.min_gap,
                           wcss(data.vectors, assignments, means), cs.leakage, cs.reseeded)


def run_qkmeans(
    data: DataSet,
    k: int,
    seeds=None,
    budget: CopyBudget = CopyBudget(),
    schedule: Schedule = DEFAULT_SCHEDULE,
    max_iter: int = 20,
    shots: int = 10_000,
    rng: Rng | None = None,
    distance_mode: str = "exact",
    tol: float = CONVERGENCE_TOL,
) -> QKMeansResult:
    """First clustering from seeds, then re-cluster until the state stops changing.

    ``seeds`` may be a list of labels or None for k-means++. ``max_iter``
    bounds the number of re-clustering steps. Convergence needs both the
    swap-test fidelity above ``1 - tol`` and unchanged decoded assignments.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if not 1 <= k <= data.M:
        raise DataError(f"k={k} must be between 1 and M={data.M}")
    rng = make_rng(0) if rng is None else rng
    if seeds is None or (isinstance(seeds, str) and seeds == "kmeans++"):
        seeds = kmeanspp_seeds(data.vectors, k, rng)
    seeds = [int(s) for s in seeds]
    if len(seeds) != k:
        raise DataError(f"expected {k} seeds, got {len(seeds)}")

    state = first_clustering(data, seeds, schedule)
    assignments = decode_assignments(state, shots, rng)
    history = [_record(state, data, shots, rng, None, assignments)]
    converged = False
    for _ in range(max_iter):
        nxt = recluster_step(state, data, budget, schedule, shots, rng, assignments, distance_mode)
        fid, same_state = convergence_check(state, nxt, tol)
        new_assignments = decode_assignments(nxt, shots, rng)
        history.append(_record(nxt, data, shots, rng, fid, new_assignments))
        converged = same_state and np.array_equal(new_assignments, assignments)
        state, assignments = nxt, new_assignments
        if converged:
            break
    return QKMeansResult(state, history, seeds, converged)


def copy_disturbance(copy_state: StateVector, costs: np.ndarray, d: int, delta: float) -> float:
    """Fidelity lost by d retained copies after one weak distance evaluation.

    A target register in the uniform (cluster, label) superposition couples to
    each copy through ``exp(-i delta a_{c,j} n_c)``: ``a`` is the cost table
    scaled into [0, 1] and ``n_c`` counts the copies found in cluster c. The
    copies' reduced state is compared with the undisturbed ``copy_state**d``.
    The product space is simulated explicitly, so keep it tiny.
    """
    k, m = costs.shape
    if copy_state.dims != (k, m):
        raise RegisterError("copy state must live on (cluster, label) matching the cost table")
    scale = costs.max()
    a = costs / scale if scale > 0 else np.zeros_like(costs)
    single = copy_state.amplitudes
    cluster_of = np.repeat(np.arange(k), m)
    copies = np.ones(1, dtype=complex)
    counts = np.zeros((1, k))
    for _ in range(d):
        copies = np.kron(copies, single)
        onehot = np.eye(k)[cluster_of]
        counts = (counts[:, None, :] + onehot[None, :, :]).reshape(-1, k)
    weights = np.abs(copies) ** 2
    fid = 0.0
    for c in range(k):
        for j in range(m):
            phase = np.exp(-1j * delta * a[c, j] * counts[:, c])
            fid += abs(np.sum(weights * phase)) ** 2 / (k * m)
    return float(1.0 - fid)
