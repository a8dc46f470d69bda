import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catsim import error_models as em
from catsim import tomography as tm
from catsim.error_models import GateErrorBudget, KrausSet, ModelValidityError
from catsim.fock import CatQubitParams

P7 = CatQubitParams.from_nbar(7, kappa1=1e-3)


def test_cnot_budget_plug_in():
    b = em.cnot_error_budget(P7, 1.27)
    assert b.p_Z1 == pytest.approx(7e-3 * 1.27 + 1 / (2 * math.pi * 7 * 1.27))
    assert b.p_Z1 == pytest.approx(0.0268, abs=5e-5)
    assert b.p_Z2 == b.p_Z1Z2 == pytest.approx(7e-3 * 1.27 / 2)
    assert b.coherences["Z2,Z1Z2"] == pytest.approx(-1j * 7e-3 * 1.27 / math.pi)
    assert b.photon_loss["p_Z1"] + b.nonadiabatic["p_Z1"] == pytest.approx(b.p_Z1)
    assert '"p_Z1"' in b.to_json()


def test_budget_scaling_with_gate_time():
    a = em.cnot_error_budget(P7, 1.0)
    b = em.cnot_error_budget(P7, 2.0)
    assert b.photon_loss["p_Z1"] == pytest.approx(2 * a.photon_loss["p_Z1"])
    assert b.nonadiabatic["p_Z1"] == pytest.approx(a.nonadiabatic["p_Z1"] / 2)
    lossless = CatQubitParams.from_nbar(7)
    assert em.cnot_error_budget(lossless, 1e9).total < 1e-9
    with pytest.raises(ValueError):
        em.cnot_error_budget(P7, 0)


def test_toffoli_budget_structure():
    T = 1.3
    b = em.toffoli_error_budget(P7, T)
    loss = 7e-3 * T
    na = 1 / (4 * math.pi * 7 * T)
    assert b.p_Z1 == b.p_Z2 == pytest.approx(loss + na)
    assert b.p_Z1Z2 == pytest.approx(na)
    assert b.p_Z3 == pytest.approx(5 * loss / 8)
    assert b.p_Z1Z3 == b.p_Z2Z3 == b.p_Z1Z2Z3 == pytest.approx(loss / 8)
    # one full target loss in total
    assert b.p_Z3 + b.p_Z1Z3 + b.p_Z2Z3 + b.p_Z1Z2Z3 == pytest.approx(loss)


def test_budget_validity():
    with pytest.raises(ModelValidityError):
        GateErrorBudget(p_Z1=1.2)
    with pytest.raises(ModelValidityError):
        GateErrorBudget(p_Z1=0.6, p_Z2=0.6)
    with pytest.raises(ModelValidityError):
        em.cnot_error_budget(CatQubitParams.from_nbar(4), 1e-3)


def test_cnot_kraus_algebra():
    T = 1.27
    loss = 7e-3 * T
    ks = em.cnot_kraus(P7, T, complete=False)
    M2, M3 = ks.operators[1], ks.operators[2]
    assert np.abs(M2.conj().T @ M2 + M3.conj().T @ M3 - loss * np.eye(4)).max() < 1e-12
    full = em.cnot_kraus(P7, T)
    assert np.abs(full.completeness() - np.eye(4)).max() < 1e-10
    chi = tm.ChiMatrix(tm.kraus_to_chi(full.operators), 2)
    assert chi.entry("IZ", "IZ").real == pytest.approx(loss / 2, abs=1e-12)
    assert chi.entry("ZZ", "ZZ").real == pytest.approx(loss / 2, abs=1e-12)
    assert abs(chi.entry("IZ", "ZZ")) == pytest.approx(loss / math.pi, abs=1e-12)
    assert chi.entry("ZI", "ZI").real == pytest.approx(loss, abs=1e-12)


def test_zero_loss_gives_identity():
    lossless = CatQubitParams.from_nbar(7)
    for ks in (em.cnot_kraus(lossless, 1.0), em.toffoli_kraus(lossless, 1.0)):
        rho = np.eye(ks.dim) / ks.dim
        rho[0, -1] = rho[-1, 0] = 0.1
        assert np.abs(ks.apply(rho) - rho).max() < 1e-12


def test_toffoli_kraus_algebra():
    T = 1.27
    loss = 7e-3 * T
    P = em.control_projector_11()
    assert np.abs(P @ P - P).max() < 1e-12
    assert np.allclose(np.diag(P), [0, 0, 0, 1])
    ks = em.toffoli_kraus(P7, T, complete=False)
    M3, M4 = ks.operators[2], ks.operators[3]
    assert np.abs(M3.conj().T @ M3 + M4.conj().T @ M4 - loss * np.eye(8)).max() < 1e-12
    full = em.toffoli_kraus(P7, T)
    assert np.abs(full.completeness() - np.eye(8)).max() < 1e-10
    # the twirled target loss matches the budget split
    tw = em.pauli_twirl(full)
    b = em.toffoli_error_budget(P7, T)
    assert tw["IIZ"] == pytest.approx(b.photon_loss["p_Z3"], abs=1e-12)
    assert tw["ZIZ"] == pytest.approx(b.photon_loss["p_Z1Z3"], abs=1e-12)
    assert tw["ZZZ"] == pytest.approx(b.photon_loss["p_Z1Z2Z3"], abs=1e-12)


def test_twirl_equals_chi_diagonal():
    ks = em.cnot_kraus(P7, 1.0)
    tw = em.pauli_twirl(ks)
    chi = tm.kraus_to_chi(ks.operators)
    assert np.allclose(list(tw.values()), np.diag(chi).real)
    assert sum(tw.values()) == pytest.approx(1, abs=1e-12)


def test_kraus_json_roundtrip():
    ks = em.cnot_kraus(P7, 1.0)
    again = KrausSet.from_json(ks.to_json())
    assert len(again.operators) == len(ks.operators)
    assert all(np.allclose(a, b) for a, b in zip(again.operators, ks.operators))


def test_headline_fidelities():
    assert em.optimal_gate_time(P7) == pytest.approx(1.27, abs=0.01)
    assert em.predicted_fidelity("cnot", P7) == pytest.approx(math.sqrt(1 - math.sqrt(4e-3 / math.pi)))
    assert round(100 * em.predicted_fidelity("cnot", P7), 1) == 98.2
    assert round(100 * em.predicted_fidelity("Toffoli", P7), 1) == 97.3
    with pytest.raises(ValueError):
        em.predicted_fidelity("swap", P7)
    with pytest.raises(ValueError):
        em.optimal_gate_time(CatQubitParams.from_nbar(7))


@pytest.mark.parametrize("gate", ["cnot", "toffoli"])
def test_optimal_time_matches_grid_search(gate):
    Ts = em.optimal_gate_time(P7)
    grid = np.linspace(0.5 * Ts, 2 * Ts, 30001)
    T_best, F_best = em.fidelity_grid_maximum(gate, P7, grid)
    assert T_best == pytest.approx(Ts, rel=1e-4)
    assert em.predicted_fidelity(gate, P7) == pytest.approx(F_best, abs=1e-9)
    assert em.predicted_fidelity(gate, P7, Ts) == pytest.approx(F_best, abs=1e-9)


def test_suppression_fit_synthetic():
    pts = [(n, 3.0 * math.exp(-2 * n)) for n in (1, 2, 3, 4)]
    assert em.suppression_fit(pts) == pytest.approx(-1, abs=1e-9)
    rng = np.random.default_rng(7)
    noisy = [(n, p * (1 + 0.1 * rng.uniform(-1, 1))) for n, p in pts]
    assert em.suppression_fit(noisy) == pytest.approx(-1, abs=0.15)
    with pytest.raises(ValueError):
        em.suppression_fit(pts[:2])
    with pytest.raises(ValueError):
        em.suppression_fit([(1, 0.1), (2, 0.0), (3, 0.01)])


@settings(max_examples=50, deadline=None)
@given(st.floats(-6, -1.5), st.floats(1, 10))
def test_cnot_never_worse_than_toffoli(log_ratio, nbar):
    p = CatQubitParams.from_nbar(nbar, kappa1=10**log_ratio)
    assert em.predicted_fidelity("cnot", p) >= em.predicted_fidelity("toffoli", p)


@settings(max_examples=50, deadline=None)
@given(st.floats(1, 8), st.floats(1e-5, 1e-3), st.floats(0.5, 5))
def test_budget_invariants(nbar, k1, T):
    p = CatQubitParams.from_nbar(nbar, kappa1=k1)
    b = em.cnot_error_budget(p, T)
    assert b.p_Z2 == b.p_Z1Z2
    assert all(0 <= v <= 1 for v in b.probabilities().values())
    ks = em.cnot_kraus(p, T)
    assert np.abs(ks.completeness() - np.eye(4)).max() < 1e-10
