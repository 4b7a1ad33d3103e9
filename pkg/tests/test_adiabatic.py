import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from qlloyd.adiabatic import (
    AdiabaticProblem,
    DistanceMatrix,
    Schedule,
    build_clusterfind_hamiltonian,
    build_seed_hamiltonian,
    clusterfind_problem,
    default_kappa,
    ground_space_probability,
    projector_h0,
    run_adiabatic,
    sample_solution,
    seed_problem,
    uniform_start,
)
from qlloyd.classical import brute_force_cluster_set, brute_force_seed_set
from qlloyd.errors import DataError, RegisterError
from qlloyd.stateprep import DataSet, QueryLedger
from qlloyd.statevector import HermitianOperator, Register, StateVector, fidelity


def argmin_set(h):
    diag = h.diagonal
    tol = 1e-9 * max(1.0, abs(diag.min()))
    dims = [r.dimension for r in h.layout]
    return {tuple(int(i) for i in np.unravel_index(j, dims)) for j in np.flatnonzero(diag <= diag.min() + tol)}


def landau_zener():
    reg = (Register("q", 2),)
    plus = StateVector(reg, np.array([1, 1], dtype=complex) / math.sqrt(2))
    return AdiabaticProblem(projector_h0(plus), HermitianOperator.from_diagonal(reg, np.array([0.0, -1.0])), plus)


class TestDistanceMatrix:
    def test_from_vectors(self, rng):
        v = rng.normal(size=(4, 3))
        D = DistanceMatrix.from_vectors(v)
        assert D.entries[1, 3] == pytest.approx(np.sum((v[1] - v[3]) ** 2))
        assert np.all(np.diag(D.entries) == 0)

    @pytest.mark.parametrize("bad", [[[0, 1], [2, 0]], [[1, 0], [0, 0]], [[0, -1], [-1, 0]], [[0, 1, 2]]])
    def test_invalid(self, bad):
        with pytest.raises(DataError):
            DistanceMatrix(np.array(bad, dtype=float))

    def test_estimated_close(self, rng):
        v = rng.normal(size=(3, 4))
        ledger = QueryLedger()
        est = DistanceMatrix.estimated(DataSet.from_vectors(v), 10**5, rng, ledger)
        exact = DistanceMatrix.from_vectors(v)
        assert np.allclose(est.entries, exact.entries, rtol=0.1, atol=0.05)
        assert est.source == "quantum-estimated" and ledger.total > 0

    def test_noise_bounded(self, rng):
        D = DistanceMatrix.from_vectors(rng.normal(size=(4, 2)))
        noisy = D.with_noise(0.01, rng)
        assert np.max(np.abs(noisy.entries - D.entries)) <= 0.01 + 1e-15


class TestSeedHamiltonian:
    def test_k1_zero(self, rng):
        D = DistanceMatrix.from_vectors(rng.normal(size=(3, 2)))
        assert np.all(build_seed_hamiltonian(D, 1).diagonal == 0)

    def test_two_points(self):
        D = DistanceMatrix(np.array([[0, 4], [4, 0.0]]))
        assert list(build_seed_hamiltonian(D, 2).diagonal) == [0, -8, -8, 0]

    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 6), k=st.integers(1, 3))
    def test_argmin_equals_brute_force(self, seed, m, k):
        assume(k <= m)
        D = DistanceMatrix.from_vectors(np.random.default_rng(seed).normal(size=(m, 2)))
        tuples, _ = brute_force_seed_set(D, k)
        assert argmin_set(build_seed_hamiltonian(D, k)) == tuples

    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(3, 4), k=st.integers(2, 3))
    def test_permutation_symmetry(self, seed, m, k):
        D = DistanceMatrix.from_vectors(np.random.default_rng(seed).normal(size=(m, 2)))
        diag = build_seed_hamiltonian(D, k).diagonal.reshape((m,) * k)
        for perm in itertools.permutations(range(k)):
            assert np.array_equal(diag, np.transpose(diag, perm))

    def test_k_too_large(self):
        with pytest.raises(DataError):
            build_seed_hamiltonian(DistanceMatrix(np.zeros((2, 2))), 3)


class TestClusterFindHamiltonian:
    def test_two_points(self):
        D = DistanceMatrix(np.array([[0, 4], [4, 0.0]]))
        h = build_clusterfind_hamiltonian(D, 2, 100.0)
        assert list(h.diagonal) == [400, 208, 208, 400]
        assert argmin_set(h) == {(0, 1), (1, 0)}

    def test_coincident_degenerate(self):
        h = build_clusterfind_hamiltonian(DistanceMatrix(np.zeros((3, 3))), 2, 0.0)
        assert np.all(h.diagonal == 0)

    def test_default_kappa(self, rng):
        D = DistanceMatrix.from_vectors(rng.normal(size=(3, 2)))
        assert default_kappa(D) == 10 * D.max
        assert np.array_equal(build_clusterfind_hamiltonian(D, 2).diagonal,
                              build_clusterfind_hamiltonian(D, 2, 10 * D.max).diagonal)

    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 5), r=st.integers(2, 3))
    def test_argmin_equals_brute_force_and_distinct(self, seed, m, r):
        assume(r <= m)
        D = DistanceMatrix.from_vectors(np.random.default_rng(seed).normal(size=(m, 2)))
        kappa = 10 * D.max
        tuples, _ = brute_force_cluster_set(D, r, kappa)
        ground = argmin_set(build_clusterfind_hamiltonian(D, r, kappa))
        assert ground == tuples
        assert all(len(set(t)) == r for t in ground)

    def test_r_exceeds_m_warns(self):
        with pytest.warns(UserWarning):
            build_clusterfind_hamiltonian(DistanceMatrix(np.zeros((2, 2))), 3, 1.0)

    def test_negative_kappa(self):
        with pytest.raises(DataError):
            build_clusterfind_hamiltonian(DistanceMatrix(np.zeros((2, 2))), 2, -1.0)


class TestStartAndProjector:
    @pytest.mark.parametrize("k,m,amp", [(1, 2, 1 / math.sqrt(2)), (2, 2, 0.5), (3, 4, 1 / 8)])
    def test_uniform_start(self, k, m, amp):
        s = uniform_start(k, m)
        assert s.dim == m**k and np.allclose(s.amplitudes, amp)

    def test_projector(self, rng):
        psi = uniform_start(2, 3)
        h0 = projector_h0(psi)
        assert np.linalg.norm(h0.apply(psi.amplitudes)) < 1e-14
        other = rng.normal(size=9) + 0j
        other -= np.vdot(psi.amplitudes, other) * psi.amplitudes
        assert np.allclose(h0.apply(other), other)
        assert np.trace(h0.to_dense()).real == pytest.approx(8)


class TestRunAdiabatic:
    def test_no_deformation(self):
        psi = uniform_start(2, 2)
        h0 = projector_h0(psi)
        diag = HermitianOperator.from_diagonal(psi.layout, np.zeros(4))
        # start is an exact zero-energy eigenstate of every H(s) = (1 - s) h0
        run = run_adiabatic(AdiabaticProblem(h0, diag, psi), Schedule(50.0, 200))
        assert fidelity(run.final, psi) > 1 - 1e-10

    def test_landau_zener(self):
        run = run_adiabatic(landau_zener(), Schedule(200.0, 2000))
        assert run.final.probabilities()[1] > 0.99

    def test_trace_matches_eigensolve(self, rng):
        D = DistanceMatrix(np.array([[0, 1, 9, 2], [1, 0, 3, 1], [9, 3, 0, 4], [2, 1, 4, 0.0]]))
        problem = seed_problem(D, 2)
        run = run_adiabatic(problem, Schedule(20.0, 400))
        s = run.trace.argmin_s
        w = np.linalg.eigvalsh(problem.hamiltonian_at(s).to_dense())
        assert abs((w[1] - w[0]) - run.trace.min_gap) < 1e-8

    def test_gap_positive_and_endpoints(self, rng):
        D = DistanceMatrix.from_vectors(rng.normal(size=(3, 2)))
        problem = seed_problem(D, 2)
        run = run_adiabatic(problem, Schedule(10.0, 100))
        assert np.all(run.trace.gap >= -1e-10)
        assert np.array_equal(problem.hamiltonian_at(0).to_dense(), problem.h0.to_dense())
        assert np.array_equal(problem.hamiltonian_at(1).to_dense(), problem.hf.to_dense())

    def test_monotone_in_tau(self):
        D = DistanceMatrix(np.array([[0, 1, 9], [1, 0, 4], [9, 4, 0.0]]))
        problem = seed_problem(D, 2)
        probs = [ground_space_probability(run_adiabatic(problem, Schedule(tau, 1000)).final, problem.hf)
                 for tau in (10.0, 50.0, 250.0)]
        assert all(b >= a - 0.01 for a, b in zip(probs, probs[1:]))

    def test_spectator_blocks_match_dense(self, rng):
        label, sys_ = Register("label", 2), Register("sys", 3)
        phi = np.full(3, 1 / math.sqrt(3))
        h0 = np.kron(np.eye(2), np.eye(3) - np.outer(phi, phi))
        diag = rng.uniform(0, 2, size=6)
        start = StateVector((label, sys_), np.full(6, 1 / math.sqrt(6), dtype=complex))
        sched = Schedule(5.0, 50)
        a = run_adiabatic(AdiabaticProblem(HermitianOperator.from_matrix(start.layout, h0),
                                           HermitianOperator.from_diagonal(start.layout, diag), start, "label"), sched)
        b = run_adiabatic(AdiabaticProblem(HermitianOperator.from_matrix(start.layout, h0),
                                           HermitianOperator.from_diagonal(start.layout, diag), start), sched)
        assert fidelity(a.final, b.final) > 1 - 1e-10

    def test_rejects_bad_start(self):
        reg = (Register("q", 2),)
        with pytest.raises(ValueError):
            AdiabaticProblem(projector_h0(StateVector.basis(reg, 0)),
                             HermitianOperator.from_diagonal(reg, np.zeros(2)), StateVector.basis(reg, 1))

    def test_layout_mismatch(self):
        with pytest.raises(RegisterError):
            AdiabaticProblem(projector_h0(uniform_start(1, 2)),
                             HermitianOperator.from_diagonal((Register("x", 2),), np.zeros(2)), uniform_start(1, 2))

    def test_smooth_schedule(self):
        sched = Schedule(1.0, 4, "smooth")
        assert sched.s(0) == 0 and sched.s(1) == 1 and sched.s(0.5) == pytest.approx(0.5)
        with pytest.raises(ValueError):
            Schedule(1.0, 4, "cubic")

    def test_gap_csv(self, tmp_path):
        run = run_adiabatic(landau_zener(), Schedule(1.0, 3))
        path = tmp_path / "gap.csv"
        run.trace.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "s,gap,ground_overlap" and len(lines) == 4


class TestSampleSolution:
    def test_basis(self, rng):
        state = StateVector.basis((Register("j1", 3), Register("j2", 3)), 6)
        assert sample_solution(state, 100, rng) == [((2, 0), 100, 1.0)]

    def test_uniform(self, rng):
        state = uniform_start(2, 3)
        ranked = sample_solution(state, 10**5, rng)
        p = 1 / 9
        assert abs(ranked[0][2] - p) < 5 * math.sqrt(p * (1 - p) / 10**5)

    def test_post_adiabatic_seed_run(self, rng):
        D = DistanceMatrix(np.array([[0, 1, 9, 2], [1, 0, 3, 1], [9, 3, 0, 4], [2, 1, 4, 0.0]]))
        final = run_adiabatic(seed_problem(D, 2), Schedule(200.0, 2000)).final
        tuples, _ = brute_force_seed_set(D, 2)
        hits = sum(sample_solution(final, 500, rng)[0][0] in tuples for _ in range(20))
        assert hits >= 18

    def test_cluster_find_run(self, rng):
        pts = np.array([[0.0, 0.0], [0.1, 0.0], [3.0, 0.0]])
        D = DistanceMatrix.from_vectors(pts)
        problem = clusterfind_problem(D, 2)
        final = run_adiabatic(problem, Schedule(200.0, 2000)).final
        assert sample_solution(final, 1000, rng)[0][0] in {(0, 1), (1, 0)}
