import math
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qlloyd.errors import DataError
from qlloyd.stateprep import (
    AMPLITUDE,
    NORM,
    SUBNORM,
    DataSet,
    QueryLedger,
    SubnormTree,
    encode_array,
    encode_charge,
    encode_vector,
    labeled_superposition,
    load_csv,
    report_queries,
)
from qlloyd.statevector import Register, StateVector

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def nonzero_rows(m_max=5, n_max=9):
    shape = st.tuples(st.integers(1, m_max), st.integers(1, n_max))
    return shape.flatmap(lambda s: arrays(float, s, elements=finite)).filter(
        lambda a: np.all(np.linalg.norm(a, axis=1) > 1e-3)
    )


class TestLoadCsv:
    def test_unit_vectors(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,0\n0,1\n")
        data = load_csv(p)
        assert (data.M, data.N) == (2, 2)
        assert np.allclose(data.norms, [1, 1])

    def test_header_detected(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,x\n2,3\n")
        assert load_csv(p).M == 1

    def test_three_four_five(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n3,4\n")
        data = load_csv(p)
        assert data.norms[0] == pytest.approx(5)
        assert data.trees[0].root == pytest.approx(25)

    def test_recompute_norms(self, tmp_path, rng):
        rows = rng.normal(size=(100, 6))
        p = tmp_path / "d.csv"
        np.savetxt(p, rows, delimiter=",")
        data = load_csv(p)
        expected = [math.sqrt(math.fsum(x * x for x in r)) for r in rows]
        assert np.allclose(data.norms, expected, rtol=1e-12)
        assert data.N == 8 and data.original_dim == 6

    @pytest.mark.parametrize("text", ["", "a,b\n", "1,2\n3\n", "1,2\n2,x\n", "0,0\n"])
    def test_bad_files(self, tmp_path, text):
        p = tmp_path / "d.csv"
        p.write_text(text)
        with pytest.raises(DataError):
            load_csv(p)


class TestSubnormTree:
    def test_parent_child_identity(self, rng):
        tree = SubnormTree.build(np.abs(rng.normal(size=16)))
        for lower, upper in zip(tree.levels, tree.levels[1:]):
            assert np.array_equal(lower[0::2] + lower[1::2], upper)
        assert tree.depth == 4

    @given(v=arrays(float, st.sampled_from([2, 4, 8, 16]), elements=finite))
    def test_root_is_squared_norm(self, v):
        tree = SubnormTree.build(np.abs(v))
        assert tree.root == pytest.approx(float(np.sum(v**2)), rel=1e-12, abs=1e-300)


class TestEncode:
    def test_basis_vector(self):
        data = DataSet.from_vectors([[1.0, 0, 0, 0]])
        assert np.allclose(encode_vector(data, 0).amplitudes, [1, 0, 0, 0])

    def test_three_four(self):
        data = DataSet.from_vectors([[3.0, 4.0]])
        assert np.allclose(encode_vector(data, 0).amplitudes, [0.6, 0.8])

    def test_random_complex(self, rng):
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        data = DataSet.from_vectors([v])
        assert np.max(np.abs(encode_vector(data, 0).amplitudes - v / np.linalg.norm(v))) < 1e-12

    def test_negative_entries_keep_sign(self):
        data = DataSet.from_vectors([[-1.0, 2.0, 0.0, -2.0]])
        assert np.allclose(encode_vector(data, 0).amplitudes, np.array([-1, 2, 0, -2]) / 3)

    @given(rows=nonzero_rows())
    def test_born_marginals(self, rows):
        data = DataSet.from_vectors(rows)
        for j in range(data.M):
            amps = encode_vector(data, j).amplitudes[: data.original_dim]
            assert np.max(np.abs(np.abs(amps) ** 2 - rows[j] ** 2 / np.sum(rows[j] ** 2))) < 1e-12

    @given(rows=nonzero_rows(), extra=st.integers(1, 4))
    def test_padding_invariance(self, rows, extra):
        a = DataSet.from_vectors(rows)
        b = DataSet.from_vectors(np.hstack([rows, np.zeros((rows.shape[0], extra))]))
        d = rows.shape[1]
        for j in range(a.M):
            assert np.allclose(encode_vector(a, j).amplitudes[:d], encode_vector(b, j).amplitudes[:d], atol=1e-14)

    def test_encode_array_matches_dataset(self, rng):
        v = rng.normal(size=5)
        data = DataSet.from_vectors([v])
        assert np.allclose(encode_array(v).amplitudes, encode_vector(data, 0).amplitudes)

    def test_zero_row_rejected(self):
        with pytest.raises(DataError):
            DataSet.from_vectors([[1.0, 0.0], [0.0, 0.0]])

    def test_label_out_of_range(self):
        with pytest.raises(DataError):
            encode_vector(DataSet.from_vectors([[1.0, 0.0]]), 3)


class TestLabeledSuperposition:
    def test_single_identical_branch(self):
        data = DataSet.from_vectors([[1.0, 0.0]])
        s = labeled_superposition(encode_vector(data, 0), data, [0])
        assert np.allclose(s.amplitudes, [1 / math.sqrt(2), 0, 1 / math.sqrt(2), 0])

    def test_two_orthonormal(self):
        data = DataSet.from_vectors([[1.0, 0.0], [0.0, 1.0]])
        s = labeled_superposition(encode_vector(data, 0), data, [0, 1])
        p = np.abs(s.tensor())
        assert np.allclose(p.max(axis=1), [1 / math.sqrt(2), 0.5, 0.5])

    def test_index_loop_oracle(self, rng):
        rows = rng.normal(size=(4, 8))
        data = DataSet.from_vectors(rows)
        u = rng.normal(size=8)
        s = labeled_superposition(encode_array(u), data, range(4))
        expected = np.zeros(5 * 8, dtype=complex)
        for i in range(8):
            expected[i] = u[i] / np.linalg.norm(u) / math.sqrt(2)
        for j in range(4):
            for i in range(8):
                expected[(j + 1) * 8 + i] = rows[j, i] / np.linalg.norm(rows[j]) / math.sqrt(2 * 4)
        assert np.allclose(s.amplitudes, expected, atol=1e-14)

    def test_dimension_mismatch(self):
        data = DataSet.from_vectors([[1.0, 0, 0, 0]])
        with pytest.raises(DataError):
            labeled_superposition(StateVector.basis((Register("data", 2),), 0), data, [0])


class TestLedger:
    def test_fresh(self):
        assert report_queries(QueryLedger()) == {AMPLITUDE: 0, NORM: 0, SUBNORM: 0, "data_size": 0}

    def test_one_encode_at_n8(self):
        ledger = QueryLedger()
        encode_vector(DataSet.from_vectors(np.ones((1, 8))), 0, ledger)
        assert ledger.counters[SUBNORM] == 5 and ledger.counters[AMPLITUDE] == 3

    @pytest.mark.parametrize("n", range(1, 8))
    def test_logarithmic_growth(self, n):
        step = {k: encode_charge(n + 1)[k] - encode_charge(n)[k] for k in (SUBNORM, AMPLITUDE)}
        assert step == {SUBNORM: 2, AMPLITUDE: 1}

    def test_superposition_charges_one_encode(self, rng):
        data = DataSet.from_vectors(rng.normal(size=(4, 8)))
        ledger = QueryLedger()
        labeled_superposition(encode_array(rng.normal(size=8)), data, range(4), ledger)
        assert report_queries(ledger) == {**encode_charge(3), NORM: 0, "data_size": 0}

    def test_concurrent_charges(self):
        ledger = QueryLedger()

        def work():
            for _ in range(1000):
                ledger.charge(AMPLITUDE)

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert ledger.counters[AMPLITUDE] == 8000
