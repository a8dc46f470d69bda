"""Numerical checks of the two-qubit bias-preservation no-go argument.

A unitary is bias preserving when it maps Z1 and Z2 to operators that commute
with Z1 and Z2.  Generators of continuous bias-preserving evolutions satisfy
[[D, Z_j], Z_k] = 0, whose solution space is spanned by I, Z1, Z2, Z1Z2; their
exponentials are the diagonal unitaries, which excludes the CNOT.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.linalg import null_space

from .tomography import pauli_labels, pauli_matrix

COMMUTATOR_TOL = 1e-9
DIAGONAL_TOL = 1e-10
UNITARY_TOL = 1e-10


def pauli_basis16():
    """(labels, matrices) of the 16 two-qubit Pauli operators."""
    labels = pauli_labels(2)
    return labels, [pauli_matrix(l) for l in labels]


def _z_ops(m: int = 2):
    return [pauli_matrix("".join("Z" if k == j else "I" for k in range(m))) for j in range(m)]


def _check_unitary(U):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("expected a square matrix")
    if np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])) > UNITARY_TOL:
        raise ValueError("matrix is not unitary")
    return U


def is_bias_preserving(U) -> bool:
    """[U Z_j U^dag, Z_k] = 0 for all j, k."""
    U = _check_unitary(U)
    m = int(round(np.log2(U.shape[0])))
    zs = _z_ops(m)
    for Zj in zs:
        conj = U @ Zj @ U.conj().T
        for Zk in zs:
            if np.linalg.norm(conj @ Zk - Zk @ conj) > COMMUTATOR_TOL:
                return False
    return True


def commutant_map(m: int = 2) -> np.ndarray:
    """Matrix of D -> ([[D, Z_j], Z_k])_{j,k} in Pauli coordinates of D.

    Rows stack the vectorised double commutators for every (j, k) pair.
    """
    labels = pauli_labels(m)
    basis = [pauli_matrix(l) for l in labels]
    zs = _z_ops(m)
    cols = []
    for P in basis:
        blocks = []
        for Zj, Zk in itertools.product(zs, zs):
            inner = P @ Zj - Zj @ P
            blocks.append((inner @ Zk - Zk @ inner).reshape(-1))
        cols.append(np.concatenate(blocks))
    return np.column_stack(cols)


def commutant_dimension(m: int = 2, tol: float = 1e-10):
    """(dimension, spanning Pauli labels) of the generator commutant."""
    A = commutant_map(m)
    ns = null_space(A, rcond=tol)
    labels = pauli_labels(m)
    support = sorted({labels[i] for i in np.nonzero(np.abs(ns).max(axis=1) > 1e-8)[0]},
                     key=labels.index)
    return ns.shape[1], support


def commutant_residual(D) -> float:
    """Norm of all double commutators [[D, Z_j], Z_k]."""
    D = np.asarray(D, dtype=complex)
    m = int(round(np.log2(D.shape[0])))
    zs = _z_ops(m)
    total = 0.0
    for Zj, Zk in itertools.product(zs, zs):
        inner = D @ Zj - Zj @ D
        total += np.linalg.norm(inner @ Zk - Zk @ inner) ** 2
    return float(np.sqrt(total))


def in_identity_component(U) -> bool:
    """True when U is reachable from I by a bias-preserving path (diagonal up to phase)."""
    U = _check_unitary(U)
    if not is_bias_preserving(U):
        raise ValueError("unitary is not bias preserving")
    off = U - np.diag(np.diag(U))
    return bool(np.linalg.norm(off) < DIAGONAL_TOL)


def random_bias_preserving(rng: np.random.Generator, m: int = 2) -> np.ndarray:
    """Random diagonal phase matrix times a random basis permutation."""
    d = 2**m
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, d))
    perm = np.eye(d)[rng.permutation(d)]
    return np.diag(phases) @ perm


def group_closure_check(samples: int = 100, seed: int = 0) -> dict:
    """Products and inverses of random bias-preserving unitaries stay bias preserving."""
    rng = np.random.default_rng(seed)
    us = [random_bias_preserving(rng) for _ in range(samples)]
    failures = 0
    for k, U in enumerate(us):
        V = us[(k + 1) % samples]
        for W in (U @ V, U.conj().T, V @ U.conj().T):
            if not is_bias_preserving(W):
                failures += 1
    return {"samples": samples, "checks": 3 * samples, "failures": failures}


def cnot() -> np.ndarray:
    return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def cz_theta(theta: float) -> np.ndarray:
    zz = np.array([1, -1, -1, 1])
    return np.diag(np.exp(1j * theta / 2 * zz))


def swap() -> np.ndarray:
    return np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def verification_report(samples: int = 100, seed: int = 0) -> dict:
    dim, labels = commutant_dimension()
    U = cnot()
    return {
        "commutant_dimension": dim,
        "commutant_basis": labels,
        "cnot_bias_preserving": is_bias_preserving(U),
        "cnot_in_identity_component": in_identity_component(U),
        "group_closure": group_closure_check(samples, seed),
        "three_qubit_commutant_dimension": commutant_dimension(3)[0],
    }
