"""Classical ground truth: Lloyd's algorithm, k-means++ seeding, exhaustive
optimizers for the seed and cluster-find objectives, and dense eigensolves.

Everything here is deliberately written by direct arithmetic and explicit
enumeration so it can serve as an independent oracle for the quantum path.
Ties always break to the lowest index; the quantum decoder uses the same rule.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError
from .statevector import HermitianOperator, Rng

MAX_EIGEN_DIM = 4096
ENUMERATION_BUDGET = 10**7


@dataclass(frozen=True, eq=False)
class Assignment:
    clusters: np.ndarray  # cluster index per label
    centroids: np.ndarray
    wcss: float


@dataclass(eq=False)
class LloydResult:
    assignment: Assignment
    iterations: int
    history: list[np.ndarray]
    wcss_history: list[float]
    converged: bool
    reseed_events: list[tuple[int, int, int]] = field(default_factory=list)  # (iteration, cluster, label)


@dataclass(frozen=True, eq=False)
class GroundState:
    energy: float
    vectors: np.ndarray  # columns span the ground space
    degenerate: bool


def _vectors(data) -> np.ndarray:
    return np.asarray(getattr(data, "vectors", data))


def exact_distance(u, v) -> float:
    """Squared Euclidean distance by direct arithmetic."""
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != v.shape:
        raise DataError(f"dimension mismatch: {u.shape} vs {v.shape}")
    diff = u - v
    return float(np.sum(np.abs(diff) ** 2))


def squared_distances(points, centers) -> np.ndarray:
    """(M, k) table of squared distances from each point to each center."""
    points, centers = np.asarray(points), np.asarray(centers)
    return np.array([[exact_distance(p, c) for c in centers] for p in points])


def pairwise_distances(points) -> np.ndarray:
    d = squared_distances(points, points)
    np.fill_diagonal(d, 0.0)
    return 0.5 * (d + d.T)


def nearest(dists: np.ndarray) -> np.ndarray:
    return np.argmin(dists, axis=1)  # first minimum wins, i.e. lowest cluster index


def wcss(points, clusters, centroids) -> float:
    points = np.asarray(points)
    return float(sum(exact_distance(points[j], centroids[c]) for j, c in enumerate(clusters)))


def update_centroids(points, clusters, k: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Cluster means; an empty cluster is re-seeded at the label farthest from
    the centroids of the non-empty clusters (labels already used are skipped).

    Returns the centroids and a list of ``(cluster, label)`` re-seed events.
    """
    points = np.asarray(points)
    clusters = np.asarray(clusters)
    centroids = np.zeros((k, points.shape[1]), dtype=points.dtype)
    filled = []
    for c in range(k):
        members = points[clusters == c]
        if len(members):
            centroids[c] = members.mean(axis=0)
            filled.append(c)
    events = []
    used: set[int] = set()
    for c in range(k):
        if c in filled:
            continue
        ref = centroids[filled] if filled else points[:0]
        best, best_d = None, -1.0
        for j, p in enumerate(points):
            if j in used:
                continue
            d = min((exact_distance(p, r) for r in ref), default=0.0)
            if d > best_d:
                best, best_d = j, d
        centroids[c] = points[best]
        used.add(best)
        filled.append(c)
        events.append((c, best))
    return centroids, events


def kmeans_lloyd(data, k: int, seeds, max_iter: int = 100) -> LloydResult:
    """Lloyd's algorithm started from the seed labels.

    ``history[i]`` is the assignment made at iteration ``i`` (iteration 0
    assigns to the seeds). The loop stops once an assignment repeats.
    """
    points = _vectors(data)
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds) or len(seeds) != k:
        raise DataError(f"need {k} distinct seed labels, got {seeds}")
    centroids = points[seeds].copy()
    history, wcss_history, events = [], [], []
    prev = None
    converged = False
    for it in range(max_iter):
        clusters = nearest(squared_distances(points, centroids))
        history.append(clusters)
        means, ev = update_centroids(points, clusters, k)
        events.extend((it, c, j) for c, j in ev)
        wcss_history.append(wcss(points, clusters, means))
        if prev is not None and np.array_equal(prev, clusters):
            converged = True
            break
        centroids, prev = means, clusters
    final = history[-1]
    means, _ = update_centroids(points, final, k)
    return LloydResult(Assignment(final, means, wcss(points, final, means)), len(history),
                       history, wcss_history, converged, events)


def kmeanspp_seeds(data, k: int, rng: Rng) -> list[int]:
    """k-means++: first seed uniform, then proportional to squared distance to
    the nearest chosen seed. Falls back to uniform over unchosen labels when
    every remaining point coincides with a seed."""
    points = _vectors(data)
    m = len(points)
    if not 1 <= k <= m:
        raise DataError(f"k={k} must be between 1 and M={m}")
    seeds = [int(rng.integers(m))]
    d2 = np.array([exact_distance(p, points[seeds[0]]) for p in points])
    while len(seeds) < k:
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(m, p=d2 / total))
        else:
            rest = [j for j in range(m) if j not in seeds]
            nxt = int(rest[rng.integers(len(rest))])
        seeds.append(nxt)
        d2 = np.minimum(d2, [exact_distance(p, points[nxt]) for p in points])
        d2[seeds] = 0.0
    return seeds


def _entries(D) -> np.ndarray:
    return np.asarray(getattr(D, "entries", D), dtype=float)


def _enumerate(D, size: int, budget: int):
    d = _entries(D)
    m = d.shape[0]
    if m**size > budget:
        raise DimensionError(f"{m}**{size} tuples exceed the enumeration budget {budget}")
    return d, itertools.product(range(m), repeat=size)


def _pick(scored: list[tuple[tuple, float]], best: float) -> set[tuple]:
    tol = 1e-9 * max(1.0, abs(best))
    return {t for t, v in scored if abs(v - best) <= tol}


def seed_objective(d: np.ndarray, tup) -> float:
    return math.fsum(d[a][b] for a in tup for b in tup)


def cluster_objective(d: np.ndarray, tup, kappa: float) -> float:
    return math.fsum(d[a][b] + (kappa if a == b else 0.0) for a in tup for b in tup)


def brute_force_seed_set(D, k: int, budget: int = ENUMERATION_BUDGET) -> tuple[set[tuple], float]:
    """All ordered k-tuples maximizing the summed pairwise squared distance."""
    d, tuples = _enumerate(D, k, budget)
    scored = [(t, seed_objective(d, t)) for t in tuples]
    best = max(v for _, v in scored)
    return _pick(scored, best), best


def brute_force_cluster_set(D, r: int, kappa: float, budget: int = ENUMERATION_BUDGET) -> tuple[set[tuple], float]:
    """All ordered r-tuples minimizing pairwise distance plus kappa per repeated index pair."""
    d, tuples = _enumerate(D, r, budget)
    scored = [(t, cluster_objective(d, t, kappa)) for t in tuples]
    best = min(v for _, v in scored)
    return _pick(scored, best), best


def orbits(tuples) -> set[tuple]:
    """Collapse ordered tuples into sorted label multisets."""
    return {tuple(sorted(t)) for t in tuples}


def exact_ground_state(h: HermitianOperator, tol: float = 1e-10) -> GroundState:
    """Lowest eigenvalue and an orthonormal basis of its eigenspace."""
    if h.dim > MAX_EIGEN_DIM:
        raise DimensionError(f"dimension {h.dim} exceeds {MAX_EIGEN_DIM}")
    if h.is_diagonal:
        diag = h.diagonal
        e0 = float(diag.min())
        idx = np.flatnonzero(diag <= e0 + tol * max(1.0, abs(e0)))
        vecs = np.zeros((h.dim, idx.size), dtype=complex)
        vecs[idx, np.arange(idx.size)] = 1.0
        return GroundState(e0, vecs, idx.size > 1)
    w, v = np.linalg.eigh(h.matrix)
    e0 = float(w[0])
    mask = w <= e0 + tol * max(1.0, abs(e0))
    return GroundState(e0, v[:, mask], int(mask.sum()) > 1)
