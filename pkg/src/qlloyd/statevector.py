"""Dense statevector engine over named qudit registers.

Amplitudes are stored flat, most-significant register first: for a layout
``(a, b)`` the basis state ``|i>_a |j>_b`` sits at index ``i * dim(b) + j``.
All objects are immutable; every operation returns a new state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import NotHermitianError, PostselectionError, RegisterError

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-12
POSTSELECT_FLOOR = 1e-14

Rng = np.random.Generator


def make_rng(seed: int) -> Rng:
    """PCG64 generator; identical seeds give identical streams on every platform."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Register:
    name: str
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise RegisterError(f"register {self.name!r} needs dimension >= 1, got {self.dimension}")


Layout = tuple[Register, ...]


def _check_layout(layout: Iterable[Register]) -> Layout:
    layout = tuple(layout)
    names = [r.name for r in layout]
    if len(set(names)) != len(names):
        raise RegisterError(f"duplicate register names in layout {names}")
    return layout


def _names(regs: str | Register | Sequence[str | Register]) -> list[str]:
    if isinstance(regs, (str, Register)):
        regs = [regs]
    return [r.name if isinstance(r, Register) else r for r in regs]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized complex amplitudes over an ordered tuple of registers."""

    layout: Layout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        layout = _check_layout(self.layout)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        expected = int(np.prod([r.dimension for r in layout], dtype=np.int64))
        if amps.size != expected:
            raise RegisterError(f"amplitude length {amps.size} does not match layout size {expected}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", _freeze(amps))

    @classmethod
    def from_amplitudes(cls, layout: Iterable[Register], amplitudes, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(tuple(layout), amps)

    @classmethod
    def basis(cls, layout: Iterable[Register], index: int | Sequence[int]) -> "StateVector":
        layout = tuple(layout)
        dims = [r.dimension for r in layout]
        flat = index if isinstance(index, (int, np.integer)) else int(np.ravel_multi_index(tuple(index), dims))
        amps = np.zeros(int(np.prod(dims, dtype=np.int64)), dtype=complex)
        amps[flat] = 1.0
        return cls(layout, amps)

    @classmethod
    def uniform(cls, register: Register) -> "StateVector":
        d = register.dimension
        return cls((register,), np.full(d, 1 / np.sqrt(d), dtype=complex))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dimension for r in self.layout)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.layout)

    def register(self, name: str) -> Register:
        for r in self.layout:
            if r.name == name:
                return r
        raise RegisterError(f"no register named {name!r} in {self.names}")

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise RegisterError(f"no register named {name!r} in {self.names}") from None

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims) if self.layout else self.amplitudes.reshape(())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def marginal(self, registers: str | Register | Sequence[str | Register]) -> np.ndarray:
        """Born distribution of the given registers, shaped by their dimensions."""
        names = _names(registers)
        axes = [self.axis(n) for n in names]
        probs = (np.abs(self.tensor()) ** 2)
        others = tuple(i for i in range(len(self.layout)) if i not in axes)
        probs = probs.sum(axis=others)
        # summed tensor keeps remaining axes in layout order; reorder to request order
        kept = [i for i in range(len(self.layout)) if i in axes]
        return np.transpose(probs, [kept.index(a) for a in axes])


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian operator stored either as a real diagonal or a dense matrix."""

    layout: Layout
    diagonal: np.ndarray | None = field(default=None, repr=False)
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        layout = _check_layout(self.layout)
        object.__setattr__(self, "layout", layout)
        dim = int(np.prod([r.dimension for r in layout], dtype=np.int64))
        if (self.diagonal is None) == (self.matrix is None):
            raise ValueError("give exactly one of diagonal or matrix")
        if self.diagonal is not None:
            diag = np.asarray(self.diagonal)
            if np.iscomplexobj(diag):
                if np.max(np.abs(diag.imag), initial=0.0) > HERMITIAN_TOL:
                    raise NotHermitianError("diagonal operator has complex entries")
                diag = diag.real
            diag = diag.astype(float).reshape(-1)
            if diag.size != dim:
                raise RegisterError(f"diagonal length {diag.size} does not match layout size {dim}")
            object.__setattr__(self, "diagonal", _freeze(diag))
        else:
            mat = np.asarray(self.matrix, dtype=complex)
            if mat.shape != (dim, dim):
                raise RegisterError(f"matrix shape {mat.shape} does not match layout size {dim}")
            if np.max(np.abs(mat - mat.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise NotHermitianError("matrix is not Hermitian")
            object.__setattr__(self, "matrix", _freeze(mat))

    @classmethod
    def from_diagonal(cls, layout: Iterable[Register], values) -> "HermitianOperator":
        return cls(tuple(layout), diagonal=values)

    @classmethod
    def from_matrix(cls, layout: Iterable[Register], matrix) -> "HermitianOperator":
        return cls(tuple(layout), matrix=matrix)

    @property
    def is_diagonal(self) -> bool:
        return self.diagonal is not None

    @property
    def dim(self) -> int:
        return int(np.prod([r.dimension for r in self.layout], dtype=np.int64))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.layout)

    def to_dense(self) -> np.ndarray:
        if self.is_diagonal:
            return np.diag(self.diagonal.astype(complex))
        return np.array(self.matrix)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Raw matrix-vector product on a flat vector over this operator's layout."""
        if self.is_diagonal:
            return self.diagonal * vec
        return self.matrix @ vec

    def expectation(self, state: StateVector) -> float:
        if state.layout != self.layout:
            raise RegisterError("expectation requires the operator and state to share a layout")
        val = np.vdot(state.amplitudes, self.apply(state.amplitudes))
        return float(val.real)

    def combine(self, weight: float, other: "HermitianOperator", other_weight: float) -> "HermitianOperator":
        """``weight * self + other_weight * other``; stays diagonal when both are."""
        if self.layout != other.layout:
            raise RegisterError("cannot combine operators on different layouts")
        if self.is_diagonal and other.is_diagonal:
            return HermitianOperator(self.layout, diagonal=weight * self.diagonal + other_weight * other.diagonal)
        mat = weight * self.to_dense() + other_weight * other.to_dense()
        # symmetrize away rounding so the Hermitian check stays exact
        return HermitianOperator(self.layout, matrix=0.5 * (mat + mat.conj().T))


def _target_matrix_view(state: StateVector, names: list[str]) -> tuple[np.ndarray, list[int]]:
    """Move the named axes to the front and flatten to (d_target, d_rest)."""
    axes = [state.axis(n) for n in names]
    t = np.moveaxis(state.tensor(), axes, list(range(len(axes))))
    d_t = int(np.prod([state.dims[a] for a in axes], dtype=np.int64))
    return t.reshape(d_t, -1), axes


def _restore(mat: np.ndarray, state: StateVector, axes: list[int]) -> np.ndarray:
    front_shape = [state.dims[a] for a in axes]
    rest_shape = [d for i, d in enumerate(state.dims) if i not in axes]
    t = mat.reshape(front_shape + rest_shape)
    return np.moveaxis(t, list(range(len(axes))), axes).reshape(-1)


def _check_acts_on(state: StateVector, layout: Layout) -> list[str]:
    names = [r.name for r in layout]
    for r in layout:
        if state.register(r.name).dimension != r.dimension:
            raise RegisterError(f"register {r.name!r} has dimension {state.register(r.name).dimension} "
                                f"in the state but {r.dimension} in the operator")
    return names


def apply_unitary(state: StateVector, unitary: np.ndarray, registers: Sequence[str | Register]) -> StateVector:
    """Apply a unitary matrix acting on ``registers`` (in the given order)."""
    names = _names(registers)
    mat, axes = _target_matrix_view(state, names)
    unitary = np.asarray(unitary, dtype=complex)
    if unitary.shape != (mat.shape[0], mat.shape[0]):
        raise RegisterError(f"unitary shape {unitary.shape} does not fit registers {names}")
    return StateVector(state.layout, _restore(unitary @ mat, state, axes))


def evolve(state: StateVector, h: HermitianOperator, t: float) -> StateVector:
    """Return ``exp(-i h t) |state>``.

    Dense operators are exponentiated by exact eigendecomposition, diagonal
    ones by entrywise phases. ``h`` may act on any subset of the state's
    registers; identity is implied on the rest.
    """
    if not isinstance(h, HermitianOperator):
        raise NotHermitianError("evolve expects a HermitianOperator")
    names = _check_acts_on(state, h.layout)
    if state.names == tuple(names):
        if h.is_diagonal:
            return StateVector(state.layout, np.exp(-1j * t * h.diagonal) * state.amplitudes)
        return StateVector(state.layout, propagator(h, t) @ state.amplitudes)
    mat, axes = _target_matrix_view(state, names)
    if h.is_diagonal:
        out = np.exp(-1j * t * h.diagonal)[:, None] * mat
    else:
        out = propagator(h, t) @ mat
    return StateVector(state.layout, _restore(out, state, axes))


def propagator(h: HermitianOperator, t: float) -> np.ndarray:
    """Dense ``exp(-i h t)`` from an exact eigendecomposition."""
    if h.is_diagonal:
        return np.diag(np.exp(-1j * t * h.diagonal))
    w, v = np.linalg.eigh(h.matrix)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def tensor_product(a: StateVector, b: StateVector) -> StateVector:
    clash = set(a.names) & set(b.names)
    if clash:
        raise RegisterError(f"register names collide: {sorted(clash)}")
    return StateVector(a.layout + b.layout, np.kron(a.amplitudes, b.amplitudes))


def inner_product(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``; the layouts must match exactly."""
    if a.layout != b.layout:
        raise RegisterError(f"layout mismatch: {a.layout} vs {b.layout}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(inner_product(a, b)) ** 2


class Projection(NamedTuple):
    probability: float
    collapsed: StateVector | None  # None when probability < POSTSELECT_FLOOR


def project_register(state: StateVector, register: str | Register, target: StateVector) -> Projection:
    """Projectively measure ``register`` against ``target`` and postselect on success.

    Returns the success probability ``||(<target| x I)|state>||^2`` and the
    renormalized state of the remaining registers. ``collapsed`` is None if
    the probability is below 1e-14.
    """
    name = _names(register)[0]
    reg = state.register(name)
    if len(target.layout) != 1 or target.layout[0].dimension != reg.dimension:
        raise RegisterError(f"target must be a single {reg.dimension}-level register state")
    mat, axes = _target_matrix_view(state, [name])
    rest = target.amplitudes.conj() @ mat
    prob = float(np.vdot(rest, rest).real)
    remaining = tuple(r for r in state.layout if r.name != name)
    if prob < POSTSELECT_FLOOR:
        return Projection(prob, None)
    return Projection(prob, StateVector(remaining, rest / np.sqrt(prob)))


def postselect(state: StateVector, register: str | Register, target: StateVector) -> Projection:
    """Like :func:`project_register` but raise when the outcome is impossible."""
    proj = project_register(state, register, target)
    if proj.collapsed is None:
        raise PostselectionError(f"postselection probability {proj.probability:.3e} is below {POSTSELECT_FLOOR}")
    return proj


def sample_register(
    state: StateVector,
    registers: str | Register | Sequence[str | Register],
    shots: int,
    rng: Rng,
) -> dict:
    """Draw ``shots`` outcomes from the Born marginal of ``registers``.

    Returns ``{outcome: count}`` for observed outcomes, sorted by outcome.
    Outcomes are ints for a single register and tuples otherwise.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    names = _names(registers)
    probs = state.marginal(names)
    shape = probs.shape
    flat = probs.reshape(-1)
    counts = rng.multinomial(shots, flat / flat.sum())
    hist = {}
    for idx in np.flatnonzero(counts):
        key = int(idx) if len(names) == 1 else tuple(int(i) for i in np.unravel_index(idx, shape))
        hist[key] = int(counts[idx])
    return hist
