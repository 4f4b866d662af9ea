import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stoquastic.errors import CapacityError, InputError
from stoquastic.hamiltonian import (
    P0, P1, SIGMA_MINUS, SIGMA_PLUS, X, Z,
    LocalHamiltonian, LocalTerm, bits_to_int, from_dense, int_to_bits, ketbra, kron_local, single,
)


def test_kron_local_puts_first_op_on_bit_zero():
    m = kron_local(P1, P0)
    # basis index 1 has bit 0 set and bit 1 clear
    assert m[1, 1] == 1 and np.trace(m) == 1


def test_ketbra_uses_character_per_qubit():
    assert ketbra("10", "10")[1, 1] == 1
    assert ketbra("01", "01")[2, 2] == 1
    assert np.allclose(ketbra("1", "0"), SIGMA_PLUS)
    assert np.allclose(SIGMA_MINUS, SIGMA_PLUS.T)


def test_bits_roundtrip():
    assert bits_to_int("011") == 6
    assert int_to_bits(6, 3) == "011"


def test_unsorted_support_is_permuted():
    # Z on qubit 2, X on qubit 0, given in the order (2, 0)
    t = LocalTerm((2, 0), kron_local(Z, X))
    ref = LocalTerm((0, 2), kron_local(X, Z))
    assert t.support == (0, 2)
    assert np.allclose(t.matrix, ref.matrix)


def test_single_qubit_embedding_matches_numpy_kron():
    h = single(3, (1,), X)
    ref = np.kron(np.eye(2), np.kron(X, np.eye(2)))
    assert np.allclose(h.to_dense(), ref)


def test_rejects_bad_terms():
    with pytest.raises(InputError):
        LocalTerm((0, 0), np.eye(4))
    with pytest.raises(InputError):
        LocalTerm((0,), np.array([[0, 1], [0, 0]]))
    with pytest.raises(InputError):
        LocalHamiltonian(2, (LocalTerm((0, 5), np.eye(4)),))


def test_dense_cap():
    h = LocalHamiltonian(15, (LocalTerm((0,), Z),))
    with pytest.raises(CapacityError):
        h.to_dense()


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_matrix_elements_match_dense(n, seed):
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(3):
        supp = tuple(sorted(rng.choice(n, size=2, replace=False)))
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        terms.append(LocalTerm(supp, a + a.conj().T))
    h = LocalHamiltonian(n, tuple(terms))
    dense = h.to_dense()
    assert np.allclose(dense, h.to_sparse().toarray())
    x, y = rng.integers(2**n, size=2)
    assert np.isclose(h.matrix_element(int(x), int(y)), dense[x, y])
    row = dict(h.row(int(x)))
    nz = np.flatnonzero(np.abs(dense[x]) > 1e-14)
    assert set(nz) <= set(row)


def test_norm_and_row_bounds():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(16, 16))
    h = from_dense(m + m.T)
    dense = h.to_dense()
    assert np.linalg.norm(dense, 2) <= h.norm_bound + 1e-12
    assert np.abs(dense).sum(axis=1).max() <= h.row_abs_bound + 1e-12


def test_with_constant_and_sum():
    h = single(2, (0,), Z)
    g = h.with_constant(1.5) + single(2, (1,), X)
    assert np.allclose(g.to_dense(), h.to_dense() + 1.5 * np.eye(4) + single(2, (1,), X).to_dense())
