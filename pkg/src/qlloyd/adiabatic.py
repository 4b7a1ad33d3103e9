"""Diagonal clustering Hamiltonians and piecewise-constant adiabatic evolution.

The interpolation is ``H(s) = (1 - s) H0 + s Hf`` with a projector initial
Hamiltonian ``H0 = 1 - |Psi><Psi|``. Each of the ``S`` steps evolves exactly
under ``H(s_i)`` for ``tau / S``, with ``s_i`` taken at the step midpoint.

A problem may name a *spectator* register. Both Hamiltonians must then be
block-diagonal in that register's basis, and each block is propagated (and
its gap measured) on its own.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .classical import MAX_EIGEN_DIM
from .distance import distance_to_centroid
from .errors import DataError, DimensionError, RegisterError
from .stateprep import DataSet, QueryLedger
from .statevector import HermitianOperator, Register, Rng, StateVector, sample_register, tensor_product


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric table of squared distances with a zero diagonal."""

    entries: np.ndarray
    source: str = "exact"

    def __post_init__(self):
        d = np.asarray(self.entries, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DataError("distance matrix must be square")
        if not np.allclose(d, d.T, rtol=0, atol=1e-12):
            raise DataError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise DataError("distance matrix must have a zero diagonal")
        if np.any(d < 0):
            raise DataError("distances must be non-negative")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "entries", d)

    @classmethod
    def from_vectors(cls, vectors) -> "DistanceMatrix":
        v = np.asarray(getattr(vectors, "vectors", vectors))
        diff = v[:, None, :] - v[None, :, :]
        d = np.sum(np.abs(diff) ** 2, axis=-1)
        np.fill_diagonal(d, 0.0)
        return cls(0.5 * (d + d.T), "exact")

    @classmethod
    def estimated(cls, data: DataSet, shots: int, rng: Rng, ledger: QueryLedger | None = None) -> "DistanceMatrix":
        """Fill the table with sampled single-vector distance estimates (clamped at 0)."""
        m = data.M
        d = np.zeros((m, m))
        vecs = data.vectors
        for a in range(m):
            for b in range(a + 1, m):
                est = distance_to_centroid(vecs[a][: data.original_dim], data.subset([b]), "sampled", shots, rng, ledger)
                d[a, b] = d[b, a] = max(est.value, 0.0)
        return cls(d, "quantum-estimated")

    def with_noise(self, delta: float, rng: Rng) -> "DistanceMatrix":
        """Perturb off-diagonal entries by independent uniform noise in [-delta, delta]."""
        m = self.M
        noise = np.zeros((m, m))
        iu = np.triu_indices(m, 1)
        noise[iu] = rng.uniform(-delta, delta, size=len(iu[0]))
        d = np.clip(self.entries + noise + noise.T, 0.0, None)
        np.fill_diagonal(d, 0.0)
        return DistanceMatrix(d, "quantum-estimated")

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def max(self) -> float:
        return float(self.entries.max())


def tuple_registers(m: int, k: int, prefix: str = "j") -> tuple[Register, ...]:
    return tuple(Register(f"{prefix}{i + 1}", m) for i in range(k))


def _pair_sum(d: np.ndarray, k: int, same_index_bonus: float = 0.0) -> np.ndarray:
    """sum over ordered position pairs (l, l') of d[j_l, j_l'] (+ bonus when j_l == j_l').

    Each entry is an exactly rounded sum, so the result does not depend on
    term order: permuted tuples agree bit for bit.
    """
    m = d.shape[0]
    terms = d + same_index_bonus * np.eye(m)
    idx = np.indices((m,) * k).reshape(k, -1)
    stacked = terms[idx[:, None, :], idx[None, :, :]].reshape(k * k, -1)
    return np.array([math.fsum(col) for col in stacked.T])


def build_seed_hamiltonian(D: DistanceMatrix, k: int) -> HermitianOperator:
    """Diagonal operator on k label registers; entry = -(sum of pairwise squared distances)."""
    m = D.M
    if k < 1 or k > m:
        raise DataError(f"need 1 <= k <= M, got k={k}, M={m}")
    return HermitianOperator.from_diagonal(tuple_registers(m, k), -_pair_sum(D.entries, k))


def default_kappa(D: DistanceMatrix) -> float:
    return 10.0 * D.max if D.max > 0 else 1.0


def build_clusterfind_hamiltonian(D: DistanceMatrix, r: int, kappa: float | None = None) -> HermitianOperator:
    """Diagonal operator on r label registers rewarding tight, distinct r-tuples.

    Entry = sum over ordered position pairs of ``D + kappa * [same label]``.
    The penalty includes the l = l' pairs, so every tuple pays at least
    ``r * kappa``.
    """
    m = D.M
    if r < 2:
        raise DataError("cluster-find needs r >= 2")
    kappa = default_kappa(D) if kappa is None else float(kappa)
    if kappa < 0:
        raise DataError("kappa must be non-negative")
    if r > m:
        warnings.warn(f"r={r} > M={m}: no tuple has all-distinct labels", stacklevel=2)
    return HermitianOperator.from_diagonal(tuple_registers(m, r), _pair_sum(D.entries, r, kappa))


def uniform_start(k_registers: int, m: int, prefix: str = "j") -> StateVector:
    state = None
    for reg in tuple_registers(m, k_registers, prefix):
        u = StateVector.uniform(reg)
        state = u if state is None else tensor_product(state, u)
    return state


def projector_h0(psi: StateVector) -> HermitianOperator:
    """``1 - |psi><psi|``: eigenvalue 0 on psi, 1 on its complement."""
    a = psi.amplitudes
    return HermitianOperator.from_matrix(psi.layout, np.eye(a.size) - np.outer(a, a.conj()))


Interpolation = Callable[[float], float]


def linear(x: float) -> float:
    return x


def smooth(x: float) -> float:
    """Quintic ramp with vanishing first and second derivatives at both ends."""
    return x**3 * (10 - 15 * x + 6 * x**2)


INTERPOLATIONS: dict[str, Interpolation] = {"linear": linear, "smooth": smooth}


@dataclass(frozen=True)
class Schedule:
    total_time: float
    steps: int = 1000
    interpolation: str = "linear"

    def __post_init__(self):
        if not self.total_time > 0:
            raise ValueError("total_time must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"unknown interpolation {self.interpolation!r}; choose from {sorted(INTERPOLATIONS)}")
        grid = np.array([self.s(x) for x in np.linspace(0, 1, 257)])
        if abs(grid[0]) > 1e-15 or abs(grid[-1] - 1) > 1e-15 or np.any(np.diff(grid) < -1e-15):
            raise ValueError("interpolation must run monotonically from 0 to 1")

    def s(self, fraction: float) -> float:
        return INTERPOLATIONS[self.interpolation](fraction)

    def s_values(self) -> np.ndarray:
        """Interpolation parameter at each step midpoint."""
        return np.array([self.s((i + 0.5) / self.steps) for i in range(self.steps)])

    @property
    def dt(self) -> float:
        return self.total_time / self.steps


@dataclass(frozen=True, eq=False)
class AdiabaticProblem:
    h0: HermitianOperator
    hf: HermitianOperator
    start: StateVector
    spectator: str | None = None

    def __post_init__(self):
        if not (self.h0.layout == self.hf.layout == self.start.layout):
            raise RegisterError("h0, hf and start must share a layout")
        if not self.hf.is_diagonal:
            raise ValueError("the final Hamiltonian must be diagonal")
        resid = np.linalg.norm(self.h0.apply(self.start.amplitudes))
        if resid > 1e-10:
            raise ValueError(f"start is not a zero-energy ground state of h0 (residual {resid:.2e})")
        if self.spectator is not None:
            self.start.register(self.spectator)

    def hamiltonian_at(self, s: float) -> HermitianOperator:
        if s == 0:
            return self.h0
        if s == 1:
            return self.hf
        return self.h0.combine(1 - s, self.hf, s)

    def block_indices(self) -> np.ndarray:
        """(blocks, block_dim) flat indices; one block unless a spectator is set."""
        dims = self.start.dims
        flat = np.arange(self.start.dim).reshape(dims)
        if self.spectator is None:
            return flat.reshape(1, -1)
        axis = self.start.axis(self.spectator)
        return np.moveaxis(flat, axis, 0).reshape(dims[axis], -1)


@dataclass(eq=False)
class GapTrace:
    s: np.ndarray
    gap: np.ndarray
    ground_overlap: np.ndarray

    @property
    def min_gap(self) -> float:
        return float(np.nanmin(self.gap)) if np.any(np.isfinite(self.gap)) else math.nan

    @property
    def argmin_s(self) -> float:
        return float(self.s[int(np.nanargmin(self.gap))]) if np.any(np.isfinite(self.gap)) else math.nan

    def rows(self) -> list[tuple[float, float, float]]:
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.s, self.gap, self.ground_overlap)]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "gap", "ground_overlap"])
            for s, g, o in self.rows():
                w.writerow([repr(s), repr(g), repr(o)])


class AdiabaticRun(NamedTuple):
    final: StateVector
    trace: GapTrace


def _block_gap(w: np.ndarray) -> np.ndarray:
    if w.shape[-1] < 2:
        return np.full(w.shape[0], np.nan)
    return w[:, 1] - w[:, 0]


def run_adiabatic(problem: AdiabaticProblem, schedule: Schedule, max_dim: int = MAX_EIGEN_DIM,
                  ground_tol: float = 1e-10) -> AdiabaticRun:
    """Evolve ``problem.start`` through ``H(s)`` along ``schedule``.

    The trace records, per step, the smallest block gap ``E1 - E0`` and the
    probability the state has in the instantaneous ground space.
    """
    blocks = problem.block_indices()
    if blocks.shape[1] > max_dim:
        raise DimensionError(f"block dimension {blocks.shape[1]} exceeds {max_dim}")
    h0 = problem.h0.to_dense()
    if problem.spectator is not None:
        mask = np.zeros(h0.shape, dtype=bool)
        for b in blocks:
            mask[np.ix_(b, b)] = True
        if np.any(np.abs(h0[~mask]) > 1e-12):
            raise ValueError("h0 is not block-diagonal in the spectator register")
    h0_blocks = np.stack([h0[np.ix_(b, b)] for b in blocks])
    hf_blocks = problem.hf.diagonal[blocks]
    psi = problem.start.amplitudes[blocks].astype(complex)
    dt = schedule.dt
    s_vals = schedule.s_values()
    gaps = np.empty(schedule.steps)
    overlaps = np.empty(schedule.steps)
    eye = np.eye(blocks.shape[1])
    for i, s in enumerate(s_vals):
        hs = (1 - s) * h0_blocks + s * hf_blocks[:, :, None] * eye
        w, v = np.linalg.eigh(hs)
        coeff = np.einsum("bji,bj->bi", v.conj(), psi)
        coeff = coeff * np.exp(-1j * w * dt)
        psi = np.einsum("bij,bj->bi", v, coeff)
        gaps[i] = np.nanmin(_block_gap(w)) if blocks.shape[1] > 1 else np.nan
        ground = w <= w[:, :1] + ground_tol * np.maximum(1.0, np.abs(w[:, :1]))
        overlaps[i] = float(np.sum(np.abs(coeff) ** 2 * ground))
    amps = np.empty(problem.start.dim, dtype=complex)
    amps[blocks] = psi
    final = StateVector(problem.start.layout, amps / np.linalg.norm(amps))
    return AdiabaticRun(final, GapTrace(s_vals, gaps, overlaps))


def ground_space_probability(state: StateVector, hf: HermitianOperator, spectator: str | None = None,
                             tol: float = 1e-9) -> float:
    """Probability mass on the minimizers of a diagonal ``hf`` (per spectator block if given)."""
    probs = state.probabilities()
    diag = hf.diagonal
    if spectator is None:
        return float(probs[diag <= diag.min() + tol * max(1.0, abs(diag.min()))].sum())
    dims = state.dims
    axis = state.axis(spectator)
    p = np.moveaxis(probs.reshape(dims), axis, 0).reshape(dims[axis], -1)
    h = np.moveaxis(diag.reshape(dims), axis, 0).reshape(dims[axis], -1)
    lo = h.min(axis=1, keepdims=True)
    return float(p[h <= lo + tol * np.maximum(1.0, np.abs(lo))].sum())


def sample_solution(final: StateVector, shots: int, rng: Rng,
                    registers: Sequence[str] | None = None) -> list[tuple[tuple[int, ...], int, float]]:
    """Sample label tuples and rank them by frequency (ties by tuple order)."""
    names = list(registers) if registers is not None else list(final.names)
    hist = sample_register(final, names, shots, rng)
    ranked = []
    for key, count in hist.items():
        key = key if isinstance(key, tuple) else (key,)
        ranked.append((key, count, count / shots))
    ranked.sort(key=lambda r: (-r[1], r[0]))
    return ranked


def seed_problem(D: DistanceMatrix, k: int) -> AdiabaticProblem:
    start = uniform_start(k, D.M)
    return AdiabaticProblem(projector_h0(start), build_seed_hamiltonian(D, k), start)


def clusterfind_problem(D: DistanceMatrix, r: int, kappa: float | None = None) -> AdiabaticProblem:
    start = uniform_start(r, D.M)
    return AdiabaticProblem(projector_h0(start), build_clusterfind_hamiltonian(D, r, kappa), start)
