import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catsim import fock
from catsim.fock import CatQubitParams, ModeSpace, TruncationError


def test_mode_space_validation():
    assert ModeSpace(2).dim == 2
    with pytest.raises(ValueError):
        ModeSpace(1)


def test_annihilation_ladder():
    a = fock.annihilation(ModeSpace(2)).toarray()
    assert a[0, 1] == 1
    a10 = fock.destroy(10)
    out = a10 @ fock.basis(10, 4)
    assert np.allclose(out, 2 * fock.basis(10, 3))


def test_commutator_truncation_artifact():
    N = 10
    a = fock.destroy(N).toarray()
    comm = a @ a.conj().T - a.conj().T @ a
    assert np.allclose(np.diag(comm)[:-1], 1)
    assert comm[-1, -1] == pytest.approx(-(N - 1))
    assert np.allclose(comm - np.diag(np.diag(comm)), 0)


def test_coherent_state_moments():
    vac = fock.coherent_state(0, 5)
    assert np.allclose(vac, fock.basis(5, 0))
    psi = fock.coherent_state(2.0, 30)
    n = fock.expect(fock.number(30), psi).real
    assert abs(n - 4) < 1e-6
    other = fock.coherent_state(-2.0, 30)
    assert abs(abs(np.vdot(other, psi)) - math.exp(-8)) < 1e-6


def test_coherent_state_rejects_short_truncation():
    with pytest.raises(TruncationError):
        fock.coherent_state(2.0, 12)
    # the default rule always passes
    for nbar in (1, 2, 4, 7, 10):
        alpha = math.sqrt(nbar)
        fock.coherent_state(alpha, fock.default_truncation(alpha))


def test_cat_state_parity_support():
    N = 30
    plus = fock.cat_state(2.0, "even", N)
    minus = fock.cat_state(2.0, "odd", N)
    assert np.allclose(plus[1::2], 0)
    assert np.allclose(minus[::2], 0)
    assert abs(np.vdot(plus, minus)) < 1e-12
    assert np.linalg.norm(plus) == pytest.approx(1, abs=1e-12)


def test_cat_state_small_alpha_limit():
    assert np.allclose(fock.cat_state(0, "even", 6), fock.basis(6, 0))
    assert abs(fock.cat_state(1e-4, "even", 6)[0]) == pytest.approx(1, abs=1e-7)
    with pytest.raises(ValueError):
        fock.cat_state(0, "odd", 6)


def test_cat_annihilation_matrix_element():
    N = 30
    alpha = 2.0
    plus = fock.cat_state(alpha, "even", N)
    minus = fock.cat_state(alpha, "odd", N)
    amp = np.vdot(minus, fock.destroy(N) @ plus)
    assert abs(amp) ** 2 == pytest.approx(alpha**2 * math.tanh(alpha**2), abs=1e-6)


def test_tensor_products():
    I2 = fock.identity(2)
    assert np.allclose(fock.tensor(I2, I2).toarray(), np.eye(4))
    a = fock.destroy(2)
    op = fock.tensor(a, fock.identity(2))
    ket = fock.tensor(fock.basis(2, 1), fock.basis(2, 0))
    assert np.allclose(op @ ket, fock.tensor(fock.basis(2, 0), fock.basis(2, 0)))
    assert fock.tensor(fock.destroy(3), fock.destroy(5)).shape == (15, 15)
    with pytest.raises(TypeError):
        fock.tensor(a, fock.basis(2, 0))


def test_code_projector_and_leakage():
    N = 20
    P = fock.code_projector(1.5, N)
    assert np.allclose(P @ P, P)
    assert np.trace(P).real == pytest.approx(2)
    V = fock.code_isometry(1.5, N)
    assert np.allclose(V.conj().T @ V, np.eye(2), atol=1e-12)
    assert fock.leakage(fock.ket2dm(V[:, 0]), P) == pytest.approx(0, abs=1e-12)
    assert fock.leakage(fock.ket2dm(fock.basis(N, 1)), P) > 0.5


def test_computational_states_approach_coherent_states():
    N = 40
    alpha = math.sqrt(7)
    zero, one = fock.cat_computational_states(alpha, N)
    # overlap with |alpha> is 1 - O(e^{-4 nbar})
    assert fock.state_fidelity(zero, fock.coherent_state(alpha, N)) > 1 - 1e-10
    assert fock.state_fidelity(one, fock.coherent_state(-alpha, N)) > 1 - 1e-10


def test_density_matrix_validation():
    rho = fock.density_matrix(fock.basis(3, 1))
    assert rho[1, 1] == 1
    with pytest.raises(ValueError):
        fock.density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValueError):
        fock.density_matrix(np.array([[0.5, 0.2], [0.1, 0.5]]))
    with pytest.raises(ValueError):
        fock.density_matrix(np.diag([1.2, -0.2]))


def test_state_fidelity_conventions():
    a = fock.basis(3, 0)
    b = (fock.basis(3, 0) + fock.basis(3, 1)) / math.sqrt(2)
    assert fock.state_fidelity(a, b) == pytest.approx(0.5)
    assert fock.state_fidelity(a, fock.ket2dm(b)) == pytest.approx(0.5)
    mixed = np.diag([0.5, 0.5, 0]).astype(complex)
    assert fock.state_fidelity(mixed, fock.ket2dm(a)) == pytest.approx(0.5, abs=1e-10)
    assert fock.state_fidelity(mixed, mixed) == pytest.approx(1, abs=1e-10)


def _wigner_oracle(rho, beta, dim, pad=60):
    from scipy.linalg import expm

    big = dim + pad
    a = fock.destroy(big).toarray()
    D = expm(beta * a.conj().T - np.conj(beta) * a)[:dim, :]
    P = fock.parity_operator(big).toarray()
    return (2 / math.pi) * np.trace(rho @ D @ P @ D.conj().T).real


@pytest.mark.parametrize("beta", [0.0, 0.3 - 0.2j, 1.1 + 0.7j, -1.5j])
def test_wigner_matches_displaced_parity(beta):
    dim = 18
    rho = fock.ket2dm(fock.cat_state(1.3, "odd", dim))
    W = fock.wigner(rho, [beta.real if isinstance(beta, complex) else beta],
                    [beta.imag if isinstance(beta, complex) else 0.0])
    assert W[0, 0] == pytest.approx(_wigner_oracle(rho, complex(beta), dim), abs=1e-9)


def test_wigner_known_values_and_normalisation():
    vac = fock.ket2dm(fock.basis(12, 0))
    assert fock.wigner(vac, [0.0], [0.0])[0, 0] == pytest.approx(2 / math.pi)
    odd = fock.ket2dm(fock.cat_state(1.5, "odd", 20))
    assert fock.wigner(odd, [0.0], [0.0])[0, 0] == pytest.approx(-2 / math.pi, abs=1e-9)
    x, p, W = fock.wigner_grid(fock.ket2dm(fock.cat_state(1.5, "even", 20)), (-5, 5), (-5, 5), 0.1)
    assert W.shape == (len(p), len(x))
    assert W.sum() * 0.01 == pytest.approx(1, abs=1e-6)


def test_grid_axis_validation():
    assert len(fock.grid_axis(-1, 1, 0.5)) == 5
    with pytest.raises(ValueError):
        fock.grid_axis(0, 1, 0)
    with pytest.raises(ValueError):
        fock.grid_axis(1, 0, 0.1)


def test_csv_writers(tmp_path):
    x = fock.grid_axis(-1, 1, 1.0)
    fock.write_grid_csv(tmp_path / "w.csv", np.eye(3), x, x, {"seed": 0})
    text = (tmp_path / "w.csv").read_text()
    assert text.startswith("# seed: 0")
    assert len([l for l in text.splitlines() if not l.startswith("#")]) == 3
    fock.write_state_csv(tmp_path / "s.csv", fock.basis(3, 1))
    assert "1,1.000000000000000e+00" in (tmp_path / "s.csv").read_text()


def test_params_roundtrip():
    p = CatQubitParams.from_nbar(4, kappa1=1e-3, n_th=0.1)
    assert p.nbar == pytest.approx(4)
    q = CatQubitParams.from_dict(p.to_dict())
    assert q == p
    assert CatQubitParams.from_dict({"alpha": [0, 2]}).alpha == 2j
    with pytest.raises(ValueError):
        CatQubitParams(alpha=1, kappa2=0)
    with pytest.raises(ValueError):
        CatQubitParams(alpha=1, kappa1=-1)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 2.5), st.floats(0, 2 * math.pi))
def test_cat_states_orthonormal_property(r, phi):
    alpha = r * np.exp(1j * phi)
    dim = fock.default_truncation(alpha)
    plus = fock.cat_state(alpha, "even", dim)
    minus = fock.cat_state(alpha, "odd", dim)
    gram = np.array([[np.vdot(u, v) for v in (plus, minus)] for u in (plus, minus)])
    assert np.allclose(gram, np.eye(2), atol=1e-12)
    # a maps each cat to the other one up to a scalar
    a = fock.destroy(dim)
    assert abs(np.vdot(plus, a @ plus)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 8), st.integers(2, 8))
def test_embed_commutes_across_modes(d1, d2):
    a = fock.embed(fock.destroy(d1), 0, [d1, d2]).toarray()
    b = fock.embed(fock.destroy(d2), 1, [d1, d2]).toarray()
    assert np.allclose(a @ b, b @ a)
    assert np.allclose(a @ b.conj().T, b.conj().T @ a)
