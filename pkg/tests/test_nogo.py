import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catsim import nogo


def test_commutant_is_spanned_by_z_products():
    dim, basis = nogo.commutant_dimension()
    assert dim == 4
    assert basis == ["II", "IZ", "ZI", "ZZ"]


def test_z_products_annihilate_double_commutators():
    labels, mats = nogo.pauli_basis16()
    for lbl, P in zip(labels, mats):
        res = nogo.commutant_residual(P)
        if set(lbl) <= {"I", "Z"}:
            assert res < 1e-12
        else:
            assert res > 1


def test_cnot_is_bias_preserving_but_not_continuous():
    U = nogo.cnot()
    assert nogo.is_bias_preserving(U)
    assert not nogo.in_identity_component(U)
    assert nogo.in_identity_component(nogo.cz_theta(0.3))
    assert nogo.is_bias_preserving(nogo.swap())


def test_hadamard_breaks_bias():
    H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert not nogo.is_bias_preserving(np.kron(H, np.eye(2)))
    with pytest.raises(ValueError):
        nogo.in_identity_component(np.kron(H, np.eye(2)))
    with pytest.raises(ValueError):
        nogo.is_bias_preserving(np.ones((4, 4)))


def test_group_closure():
    res = nogo.group_closure_check(100, seed=3)
    assert res == {"samples": 100, "checks": 300, "failures": 0}


def test_verification_report():
    rep = nogo.verification_report()
    assert rep["commutant_dimension"] == 4
    assert rep["cnot_bias_preserving"] is True
    assert rep["cnot_in_identity_component"] is False
    assert rep["three_qubit_commutant_dimension"] == 8


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-np.pi, np.pi), min_size=4, max_size=4))
def test_commutant_exponentials_are_diagonal(coeffs):
    labels, mats = nogo.pauli_basis16()
    D = sum(c * mats[labels.index(l)] for c, l in zip(coeffs, ["II", "IZ", "ZI", "ZZ"]))
    U = np.diag(np.exp(-1j * np.diag(D)))
    assert nogo.commutant_residual(D) < 1e-12
    assert nogo.in_identity_component(U)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_bias_preserving_samples(seed):
    U = nogo.random_bias_preserving(np.random.default_rng(seed))
    assert nogo.is_bias_preserving(U)
    assert np.allclose(U.conj().T @ U, np.eye(4))
