"""Supervised cluster assignment by quantum distance estimation.

The squared distance between a vector u and the mean of M cluster vectors is
read off a projective measurement of the ancilla of

    |psi> = (|0>|u> + M**-0.5 sum_j |j>|v_j>) / sqrt(2)

onto |phi> = (|u| |0> - M**-0.5 sum_j |v_j| |j>) / sqrt(Z). With
Z = |u|^2 + mean_j |v_j|^2 the success probability is D / (2 Z).

Two modes are offered everywhere: ``"exact"`` returns the analytic Born
probability, ``"sampled"`` draws finite-shot Bernoulli statistics. Amplitude
amplification / quantum counting is not simulated; sampled mode pays the
classical 1/eps^2 repetition cost instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError, PostselectionError, RegisterError
from .stateprep import NORM, DataSet, QueryLedger, encode_array, labeled_superposition
from .statevector import (
    HermitianOperator,
    Register,
    Rng,
    StateVector,
    apply_unitary,
    evolve,
    inner_product,
    postselect,
    project_register,
    tensor_product,
)

SMALL_ANGLE_LIMIT = 0.1
DEFAULT_ANGLE = 0.05
MAX_POSTSELECT_TRIALS = 10**12
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class DistanceEstimate:
    """A quantum-estimated scalar. ``shots`` is 0 in exact mode."""

    value: float
    std_error: float
    shots: int
    mode: str

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "shots": self.shots, "mode": self.mode}


@dataclass(frozen=True)
class PhiJob:
    t: float
    Z: float
    success_probability: float


@dataclass(frozen=True)
class SwapTestResult:
    overlap: float
    success_probability: float
    std_error: float
    shots: int
    mode: str


@dataclass(frozen=True)
class ClassAssignment:
    label: str  # "V" or "W"
    distance_v: DistanceEstimate
    distance_w: DistanceEstimate
    tie: bool


@dataclass(frozen=True)
class NonlinearMetricSpec:
    """Copy count ``q`` and a Hermitian ``L`` on the (N*N)**q space of (|u>|v>)^q."""

    q: int
    L: HermitianOperator

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be a positive integer")
        if not isinstance(self.L, HermitianOperator):
            object.__setattr__(self, "L", HermitianOperator.from_matrix((Register("L", len(self.L)),), self.L))


def _check_mode(mode: str) -> str:
    if mode not in ("exact", "sampled"):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    return mode


def _norms(u_norm: float, v_norms) -> tuple[float, np.ndarray]:
    v_norms = np.atleast_1d(np.asarray(v_norms, dtype=float))
    if v_norms.size == 0:
        raise DataError("need at least one cluster vector")
    if u_norm <= 0 or np.any(v_norms <= 0):
        raise DataError("norms must be strictly positive (zero vectors are not allowed)")
    return float(u_norm), v_norms


def z_value(u_norm: float, v_norms) -> float:
    u_norm, v_norms = _norms(u_norm, v_norms)
    return u_norm**2 + float(np.mean(v_norms**2))


def default_time(u_norm: float, v_norms) -> float:
    u_norm, v_norms = _norms(u_norm, v_norms)
    return DEFAULT_ANGLE / max(u_norm, float(v_norms.max()))


def _check_angle(u_norm: float, v_norms: np.ndarray, t: float) -> None:
    if t * max(u_norm, float(v_norms.max())) > SMALL_ANGLE_LIMIT:
        raise ValueError(f"t={t} leaves the small-angle regime (max norm * t must be <= {SMALL_ANGLE_LIMIT})")


def flag_evolution(u_norm: float, v_norms, t: float) -> StateVector:
    """Evolve ``(|0> - M**-0.5 sum_j |j>)/sqrt(2) |0>_flag`` under ``diag(norms) x sigma_x``."""
    u_norm, v_norms = _norms(u_norm, v_norms)
    m = v_norms.size
    anc, flag = Register("ancilla", m + 1), Register("flag", 2)
    start = np.full(m + 1, -1 / np.sqrt(2 * m), dtype=complex)
    start[0] = 1 / np.sqrt(2)
    state = tensor_product(StateVector((anc,), start), StateVector.basis((flag,), 0))
    h = HermitianOperator.from_matrix((anc, flag), np.kron(np.diag(np.r_[u_norm, v_norms]), SIGMA_X))
    return evolve(state, h, t)


def flag_probability(u_norm: float, v_norms, t: float) -> float:
    """Probability that the flag qubit reads 1 after the norm-coupled evolution."""
    evolved = flag_evolution(u_norm, v_norms, t)
    return project_register(evolved, "flag", StateVector.basis((Register("flag", 2),), 1)).probability


def build_phi_state(u_norm: float, v_norms, t: float) -> tuple[StateVector, PhiJob]:
    """Prepare |phi> on the ancilla by evolving and postselecting the flag on |1>.

    The result is proportional to ``sin(|u| t)|0> - M**-0.5 sum_j sin(|v_j| t)|j>``
    (up to a global phase), which approaches |phi> for small ``t``.
    """
    u_norm, v_norms = _norms(u_norm, v_norms)
    _check_angle(u_norm, v_norms, t)
    evolved = flag_evolution(u_norm, v_norms, t)
    proj = postselect(evolved, "flag", StateVector.basis((Register("flag", 2),), 1))
    return proj.collapsed, PhiJob(t, z_value(u_norm, v_norms), proj.probability)


def analytic_phi(u_norm: float, v_norms) -> StateVector:
    u_norm, v_norms = _norms(u_norm, v_norms)
    amps = np.r_[u_norm, -v_norms / np.sqrt(v_norms.size)].astype(complex)
    return StateVector.from_amplitudes((Register("ancilla", v_norms.size + 1),), amps, normalize=True)


def _z_from_rate(rate: float, t: float) -> float:
    return 2.0 * rate / t**2


def estimate_Z(
    u_norm: float,
    v_norms,
    t: float | None = None,
    shots: int | None = None,
    rng: Rng | None = None,
) -> DistanceEstimate:
    """Estimate Z from the flag-|1> rate, ``Z ~ 2 p / t**2``.

    ``shots=None`` returns the small-angle value of the exact probability
    (biased by a relative ``O(t**2 |v|**2)``); otherwise ``shots`` flag
    measurements are simulated.
    """
    u_norm, v_norms = _norms(u_norm, v_norms)
    t = default_time(u_norm, v_norms) if t is None else t
    _check_angle(u_norm, v_norms, t)
    p = flag_probability(u_norm, v_norms, t)
    if p < 1e-14:
        raise PostselectionError("flag probability vanishes; is t = 0?")
    if shots is None:
        return DistanceEstimate(_z_from_rate(p, t), 0.0, 0, "exact")
    if rng is None:
        raise ValueError("sampled mode needs an rng")
    hits = rng.binomial(shots, p)
    rate = hits / shots
    se = _z_from_rate(np.sqrt(rate * (1 - rate) / shots), t)
    return DistanceEstimate(_z_from_rate(rate, t), float(se), int(shots), "sampled")


def distance_to_centroid(
    u,
    cluster: DataSet,
    mode: str = "exact",
    shots: int = 10_000,
    rng: Rng | None = None,
    ledger: QueryLedger | None = None,
    t: float | None = None,
    max_trials: int = MAX_POSTSELECT_TRIALS,
) -> DistanceEstimate:
    """Estimate ``|u - mean(cluster)|**2`` from the ancilla projection.

    Exact mode builds |phi> from the stored norms and returns ``2 Z P``.
    Sampled mode prepares |phi> by flag postselection, counts how many flag
    trials it took to obtain ``shots`` copies (which also estimates Z), and
    measures each copy once.
    """
    _check_mode(mode)
    u = np.asarray(u)
    if u.ndim != 1 or u.size > cluster.N or (u.size != cluster.N and u.size != cluster.original_dim):
        raise DataError(f"u has {u.size} entries but the cluster vectors have {cluster.N}")
    u_state = encode_array(u)
    u_norm = float(np.linalg.norm(u))
    psi = labeled_superposition(u_state, cluster, range(cluster.M), ledger)
    v_norms = np.asarray(cluster.norms)
    z = z_value(u_norm, v_norms)
    if ledger is not None:
        ledger.charge(NORM)  # one superposed read of the norm table builds |phi>

    if mode == "exact":
        p = project_register(psi, "ancilla", analytic_phi(u_norm, v_norms)).probability
        return DistanceEstimate(2.0 * z * p, 0.0, 0, "exact")

    if rng is None:
        raise ValueError("sampled mode needs an rng")
    t = default_time(u_norm, v_norms) if t is None else t
    phi, job = build_phi_state(u_norm, v_norms, t)
    p = project_register(psi, "ancilla", phi).probability
    hits = rng.binomial(shots, min(max(p, 0.0), 1.0))
    trials = shots + int(rng.negative_binomial(shots, job.success_probability))
    if trials > max_trials:
        raise PostselectionError(f"needed {trials} flag trials for {shots} copies of |phi> (limit {max_trials})")
    rate = shots / trials
    z_hat = _z_from_rate(rate, t)
    z_se = z_hat * np.sqrt((1 - rate) / shots)
    p_hat = hits / shots
    p_se = np.sqrt(p_hat * (1 - p_hat) / shots)
    value = 2.0 * z_hat * p_hat
    se = 2.0 * np.hypot(z_hat * p_se, p_hat * z_se)
    return DistanceEstimate(float(value), float(se), int(shots), "sampled")


def _swap_circuit_state(a: StateVector, b: StateVector) -> StateVector:
    """Run H, controlled-SWAP, H on ``|0>_anc |a> |b>`` and return the final state."""
    da, db = a.dim, b.dim
    ra, rb, anc = Register("a", da), Register("b", db), Register("swap_anc", 2)
    state = tensor_product(StateVector.basis((anc,), 0),
                           tensor_product(StateVector((ra,), a.amplitudes), StateVector((rb,), b.amplitudes)))
    state = apply_unitary(state, HADAMARD, ["swap_anc"])
    t = np.array(state.amplitudes).reshape(2, da, db)
    t[1] = t[1].T
    state = StateVector(state.layout, t.reshape(-1))
    return apply_unitary(state, HADAMARD, ["swap_anc"])


def swap_test(
    a: StateVector,
    b: StateVector,
    mode: str = "exact",
    shots: int = 10_000,
    rng: Rng | None = None,
) -> SwapTestResult:
    """Overlap ``|<a|b>|**2`` via the swap test.

    The ancilla success probability comes from simulating the circuit. Exact
    mode reports the overlap from the inner product; sampled mode inverts
    the measured success rate ``(1 + overlap)/2`` and clamps to [0, 1].
    """
    _check_mode(mode)
    if a.layout != b.layout:
        raise RegisterError("swap test needs identical layouts")
    final = _swap_circuit_state(a, b)
    p0 = float(final.marginal("swap_anc")[0])
    if mode == "exact":
        return SwapTestResult(abs(inner_product(a, b)) ** 2, p0, 0.0, 0, "exact")
    if rng is None:
        raise ValueError("sampled mode needs an rng")
    hits = rng.binomial(shots, min(max(p0, 0.0), 1.0))
    rate = hits / shots
    overlap = min(max(2 * rate - 1, 0.0), 1.0)
    se = 2 * np.sqrt(rate * (1 - rate) / shots)
    return SwapTestResult(overlap, rate, float(se), int(shots), "sampled")


def assign_two_class(
    u,
    V: DataSet,
    W: DataSet,
    mode: str = "exact",
    shots: int = 10_000,
    rng: Rng | None = None,
    ledger: QueryLedger | None = None,
) -> ClassAssignment:
    """Assign ``u`` to the class whose mean is nearer; ties go to V and are flagged."""
    dv = distance_to_centroid(u, V, mode, shots, rng, ledger)
    dw = distance_to_centroid(u, W, mode, shots, rng, ledger)
    gap = dw.value - dv.value
    threshold = 1e-12 if mode == "exact" else float(np.hypot(dv.std_error, dw.std_error))
    tie = abs(gap) < threshold
    label = "V" if tie or gap > 0 else "W"
    return ClassAssignment(label, dv, dw, bool(tie))


def swap_operator(n: int) -> np.ndarray:
    """Permutation matrix exchanging two n-level registers."""
    op = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            op[j * n + i, i * n + j] = 1.0
    return op


def copies_state(u: StateVector, v: StateVector, q: int) -> np.ndarray:
    pair = np.kron(u.amplitudes, v.amplitudes)
    out = np.ones(1, dtype=complex)
    for _ in range(q):
        out = np.kron(out, pair)
    return out


def nonlinear_expectation(
    u,
    v,
    spec: NonlinearMetricSpec,
    mode: str = "exact",
    shots: int = 10_000,
    rng: Rng | None = None,
    max_qubits: int = 12,
) -> DistanceEstimate:
    """Evaluate ``(<u|<v|)^q L (|u>|v>)^q`` for normalized encodings of u and v.

    Sampled mode measures L in its eigenbasis and averages eigenvalues.
    """
    _check_mode(mode)
    us = u if isinstance(u, StateVector) else encode_array(u)
    vs = v if isinstance(v, StateVector) else encode_array(v)
    if us.dim != vs.dim:
        raise DataError("u and v must have the same dimension")
    n = us.dim
    qubits = spec.q * 2 * int(np.ceil(np.log2(n)))
    if qubits > max_qubits:
        raise DimensionError(f"{qubits} qubits exceed the budget of {max_qubits}")
    if spec.L.dim != (n * n) ** spec.q:
        raise DimensionError(f"L has dimension {spec.L.dim}, expected {(n * n) ** spec.q}")
    psi = copies_state(us, vs, spec.q)
    if mode == "exact":
        val = np.vdot(psi, spec.L.apply(psi))
        if abs(val.imag) > 1e-12:
            raise ValueError(f"expectation has imaginary part {val.imag:.3e}; L is not Hermitian")
        return DistanceEstimate(float(val.real), 0.0, 0, "exact")
    if rng is None:
        raise ValueError("sampled mode needs an rng")
    if spec.L.is_diagonal:
        evals, probs = spec.L.diagonal, np.abs(psi) ** 2
    else:
        evals, vecs = np.linalg.eigh(spec.L.matrix)
        probs = np.abs(vecs.conj().T @ psi) ** 2
    counts = rng.multinomial(shots, probs / probs.sum())
    mean = float(counts @ evals / shots)
    var = float(counts @ (evals - mean) ** 2 / shots)
    return DistanceEstimate(mean, float(np.sqrt(var / shots)), int(shots), "sampled")
