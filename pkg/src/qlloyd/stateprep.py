"""Classical data ingestion and amplitude encoding with metered memory access.

The quantum memory is modeled as classical storage plus a :class:`QueryLedger`
that charges every read a state preparation would make. Vectors are stored as
magnitudes and phases together with a binary tree of partial squared norms,
which is what a log-depth preparation walks.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .statevector import Register, StateVector

AMPLITUDE = "amplitude_reads"
NORM = "norm_reads"
SUBNORM = "subnorm_reads"


@dataclass(frozen=True, eq=False)
class SubnormTree:
    """Partial squared norms over dyadic blocks.

    ``levels[0]`` holds the squared magnitudes of the N entries; each next
    level sums adjacent pairs; ``levels[-1]`` is the single root.
    """

    levels: tuple[np.ndarray, ...]

    @classmethod
    def build(cls, magnitudes: np.ndarray) -> "SubnormTree":
        level = np.asarray(magnitudes, dtype=float) ** 2
        levels = [level]
        while level.size > 1:
            level = level[0::2] + level[1::2]
            levels.append(level)
        for lv in levels:
            lv.setflags(write=False)
        return cls(tuple(levels))

    @property
    def root(self) -> float:
        return float(self.levels[-1][0])

    @property
    def depth(self) -> int:
        return len(self.levels) - 1


@dataclass
class QueryLedger:
    """Counts memory reads by kind. Increments are serialized by a lock."""

    counters: dict = field(default_factory=lambda: {AMPLITUDE: 0, NORM: 0, SUBNORM: 0})
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def charge(self, kind: str, n: int = 1) -> None:
        if kind not in self.counters:
            raise KeyError(f"unknown access kind {kind!r}")
        if n < 0:
            raise ValueError("charges are non-negative")
        with self._lock:
            self.counters[kind] += n

    @property
    def total(self) -> int:
        return sum(self.counters.values())


def encode_charge(n_qubits: int) -> dict[str, int]:
    """Reads charged for one (possibly superposed) amplitude encoding.

    The walk descends ``n`` levels. Each level reads its left child, every
    level below the root re-reads its parent (the root is the stored norm and
    is known up front), and each level applies one magnitude/phase read.
    """
    return {SUBNORM: 2 * n_qubits - 1, AMPLITUDE: n_qubits}


@dataclass(frozen=True, eq=False)
class DataSet:
    """M stored vectors of dimension N = 2**n, kept as magnitudes and phases."""

    magnitudes: np.ndarray
    phases: np.ndarray
    norms: np.ndarray
    trees: tuple[SubnormTree, ...]
    original_dim: int
    is_real: bool = True

    @classmethod
    def from_vectors(cls, vectors) -> "DataSet":
        vecs = np.asarray(vectors)
        if vecs.ndim != 2 or vecs.shape[0] == 0 or vecs.shape[1] == 0:
            raise DataError("expected a non-empty 2-D array of vectors")
        if not np.all(np.isfinite(vecs)):
            raise DataError("vectors contain non-finite entries")
        is_real = not np.iscomplexobj(vecs) or bool(np.all(vecs.imag == 0))
        if is_real:
            vecs = np.real(vecs).astype(float)
        original_dim = vecs.shape[1]
        n = max(1, int(np.ceil(np.log2(original_dim))))
        padded = np.zeros((vecs.shape[0], 2**n), dtype=vecs.dtype)
        padded[:, :original_dim] = vecs
        mags = np.abs(padded)
        phases = np.where(padded.real < 0, np.pi, 0.0) if is_real else np.angle(padded)
        norms = np.sqrt(np.sum(mags**2, axis=1))
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise DataError(f"row {int(zero[0])} is the zero vector")
        trees = tuple(SubnormTree.build(m) for m in mags)
        for arr in (mags, phases, norms):
            arr.setflags(write=False)
        return cls(mags, phases, norms, trees, original_dim, is_real)

    @property
    def M(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def N(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.N))

    @property
    def vectors(self) -> np.ndarray:
        """Reassembled (padded) vectors, real-valued when the input was real."""
        if self.is_real:
            return np.where(self.phases == np.pi, -self.magnitudes, self.magnitudes)
        return self.magnitudes * np.exp(1j * self.phases)

    @property
    def padding_mask(self) -> np.ndarray:
        mask = np.zeros(self.N, dtype=bool)
        mask[: self.original_dim] = True
        return mask

    def check_label(self, j: int) -> int:
        if not (0 <= int(j) < self.M):
            raise DataError(f"label {j} out of range for M={self.M}")
        return int(j)

    def subset(self, labels: Iterable[int]) -> "DataSet":
        labels = [self.check_label(j) for j in labels]
        if not labels:
            raise DataError("empty subset")
        return DataSet(
            self.magnitudes[labels], self.phases[labels], self.norms[labels],
            tuple(self.trees[j] for j in labels), self.original_dim, self.is_real,
        )

    def data_register(self, name: str = "data") -> Register:
        return Register(name, self.N)


def _parse_row(row: list[str], lineno: int) -> list[float]:
    try:
        return [float(x) for x in row]
    except ValueError:
        raise DataError(f"line {lineno}: non-numeric field in {row!r}") from None


def load_csv(path: str | Path) -> DataSet:
    """Read one vector per row. A non-numeric first row is treated as a header."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i + 1, [c.strip() for c in r]) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    first_line, first = rows[0]
    try:
        [float(x) for x in first]
    except ValueError:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: header but no data rows")
    values = [_parse_row(r, ln) for ln, r in rows]
    width = len(values[0])
    for (ln, _), v in zip(rows, values):
        if len(v) != width:
            raise DataError(f"{path} line {ln}: expected {width} fields, got {len(v)}")
    return DataSet.from_vectors(np.array(values, dtype=float))


def _tree_walk_amplitudes(tree: SubnormTree, phases: np.ndarray) -> np.ndarray:
    """Amplitudes produced by the log-depth rotation cascade over ``tree``.

    Each node splits its weight between its children with probability
    ``left / parent``; the leaf amplitude is the square root of the product of
    branch probabilities along its path, times the stored phase.
    """
    probs = np.ones(1)
    for d in range(tree.depth - 1, -1, -1):
        children = tree.levels[d]
        parents = tree.levels[d + 1]
        left = children[0::2]
        with np.errstate(invalid="ignore", divide="ignore"):
            p_left = np.where(parents > 0, left / parents, 0.0)
        branch = np.empty(children.size)
        branch[0::2] = p_left
        branch[1::2] = np.where(parents > 0, 1.0 - p_left, 0.0)
        probs = np.repeat(probs, 2) * branch
    return np.sqrt(np.clip(probs, 0.0, None)) * np.exp(1j * phases)


def encode_vector(data: DataSet, j: int, ledger: QueryLedger | None = None, name: str = "data") -> StateVector:
    """Amplitude-encode stored vector ``j`` onto log2(N) qubits (one N-level register)."""
    j = data.check_label(j)
    if ledger is not None:
        for kind, n in encode_charge(data.n_qubits).items():
            ledger.charge(kind, n)
    amps = _tree_walk_amplitudes(data.trees[j], data.phases[j])
    return StateVector((Register(name, data.N),), amps)


def encode_array(u, name: str = "data") -> StateVector:
    """Normalize a caller-supplied vector into a state (no memory access charged)."""
    u = np.asarray(u)
    if u.ndim != 1:
        raise DataError("expected a 1-D vector")
    n = max(1, int(np.ceil(np.log2(u.size))))
    padded = np.zeros(2**n, dtype=complex)
    padded[: u.size] = u
    norm = np.linalg.norm(padded)
    if norm == 0:
        raise DataError("cannot encode the zero vector")
    return StateVector((Register(name, 2**n),), padded / norm)


def labeled_superposition(
    u: StateVector,
    data: DataSet,
    subset: Sequence[int],
    ledger: QueryLedger | None = None,
    ancilla: str = "ancilla",
) -> StateVector:
    """Build ``(|0>|u> + M**-0.5 * sum_j |j>|v_j>) / sqrt(2)``.

    The ancilla has M+1 levels with M = len(subset); branch ``j`` (1-based)
    carries subset element ``j-1``. The M data branches are fetched with one
    memory query addressed by the ancilla in superposition, so the ledger is
    charged a single encoding.
    """
    subset = [data.check_label(j) for j in subset]
    if not subset:
        raise DataError("labeled superposition needs a non-empty subset")
    if len(u.layout) != 1 or u.layout[0].dimension != data.N:
        raise DataError(f"u must be a single {data.N}-level register state")
    m = len(subset)
    amps = np.empty((m + 1, data.N), dtype=complex)
    amps[0] = u.amplitudes
    for row, j in enumerate(subset, start=1):
        amps[row] = encode_vector(data, j).amplitudes
    amps[1:] /= np.sqrt(m)
    amps /= np.sqrt(2)
    if ledger is not None:
        for kind, n in encode_charge(data.n_qubits).items():
            ledger.charge(kind, n)
    return StateVector((Register(ancilla, m + 1), Register(u.layout[0].name, data.N)), amps.reshape(-1))


def report_queries(ledger: QueryLedger, data_size: int = 0) -> dict:
    """Per-kind read totals plus the data size M*N they should be compared with."""
    return {
        AMPLITUDE: int(ledger.counters[AMPLITUDE]),
        NORM: int(ledger.counters[NORM]),
        SUBNORM: int(ledger.counters[SUBNORM]),
        "data_size": int(data_size),
    }
