import math

import pytest

from catsim.qec import (
    GADGETS,
    RepCodeParams,
    first_order_x_rate,
    below_threshold_fit,
    hadamard_gadget_logical_check,
    iid_memory_rate,
    logical_cnot_check,
    logical_error_rate,
    logical_gadget,
    logical_toffoli_check,
    memory_circuit,
    minimum_failing_faults,
    rates_to_csv,
    sample,
    single_fault_failures,
    truncated_enumeration,
)
from catsim.qec.rates import binomial_stderr, qubits_for_target, x_locations
from catsim.qec.simulate import CHUNK, chunk_rng

Z_ONLY = dict(p_prep=2e-3, p_idle=2e-3, p_meas=2e-3,
              cnot={"Z1": 2e-3, "Z2": 1e-3, "Z1Z2": 1e-3},
              toffoli={k: 1e-3 for k in ("Z1", "Z2", "Z3", "Z1Z2", "Z1Z3", "Z2Z3", "Z1Z2Z3")})


def test_iid_rate_closed_form():
    p = 0.01
    assert iid_memory_rate(3, p) == pytest.approx(3 * p**2 - 2 * p**3)
    assert iid_memory_rate(5, p) < iid_memory_rate(3, p)


def test_code_capacity_monte_carlo():
    p = 1e-2
    shots = 200_000
    rate = logical_error_rate("memory", RepCodeParams(n=3, p_data=p), shots, seed=11)
    exact = 3 * p**2 - 2 * p**3
    assert abs(rate.p_ZL - exact) < 3 * math.sqrt(exact * (1 - exact) / shots)
    assert rate.p_XL == 0 and rate.x_frame_shots == 0
    five = logical_error_rate("memory", RepCodeParams(n=5, p_data=p), shots, seed=11)
    assert five.p_ZL < rate.p_ZL


def test_noiseless_rates_vanish():
    for kind in GADGETS:
        r = logical_error_rate(kind, RepCodeParams(n=3), 2000, seed=0)
        assert r.p_ZL == 0 and r.p_XL == 0


def test_memory_matches_truncated_enumeration():
    params = RepCodeParams(n=3, r=3, p_idle=1e-2, p_meas=1e-2)
    circ = memory_circuit(params)
    lower, upper = truncated_enumeration(circ, max_faults=3)
    assert upper - lower < 5e-5
    shots = 400_000
    rate = logical_error_rate(circ, params, shots, seed=5)
    sigma = binomial_stderr(rate.z_failures, shots)
    assert lower - 3 * sigma <= rate.p_ZL <= upper + 3 * sigma


def test_single_measurement_error_is_harmless():
    params = RepCodeParams(n=5, r=3, p_meas=1e-2)
    circ = memory_circuit(params)
    assert single_fault_failures(circ) == []


@pytest.mark.parametrize("kind,r", [
    ("memory", 1), ("prep_plus_L", 1), ("CNOT_transversal", 1), ("measure_XL", 1),
    ("Toffoli_pieceable", 2), ("Hadamard_gadget", 2),
])
@pytest.mark.parametrize("decoder", ["mwpm", "weighted"])
def test_single_faults_never_fail(kind, r, decoder):
    circ = logical_gadget(kind, RepCodeParams(n=3, r=r, **Z_ONLY))
    assert single_fault_failures(circ, decoder) == []


def test_one_round_between_pieces_is_not_enough():
    # a fault just before the last syndrome round of an intermediate stage is
    # copied by the next piece before it can be confirmed
    circ = logical_gadget("Toffoli_pieceable", RepCodeParams(n=3, r=1, **Z_ONLY))
    assert single_fault_failures(circ)


@pytest.mark.slow
def test_toffoli_needs_two_faults():
    circ = logical_gadget("Toffoli_pieceable", RepCodeParams(n=3, r=2, p_idle=1e-3,
                                                             toffoli={"Z3": 1e-3}))
    assert minimum_failing_faults(circ, max_faults=2) == 2


@pytest.mark.parametrize("kind", GADGETS)
def test_z_only_noise_never_creates_x(kind):
    circ = logical_gadget(kind, RepCodeParams(n=3, r=2, **{**Z_ONLY, "p_idle": 0.02}))
    counts = sample(circ, 20_000, seed=1)
    assert counts.x_seen == 0
    if kind != "Hadamard_gadget":
        assert counts.x_fail == 0
    # in the Hadamard gadget a Z flip on the measured block becomes an X_L correction


def test_bit_flips_are_uncorrected():
    params = RepCodeParams(n=3, p_x=1e-3)
    rate = logical_error_rate("memory", params, 200_000, seed=4)
    circ = logical_gadget("memory", params)
    assert rate.p_XL_analytic == pytest.approx(x_locations(circ) * 1e-3)
    exact = first_order_x_rate(circ)
    assert exact <= rate.p_XL_analytic
    sigma = binomial_stderr(round(exact * 200_000), 200_000)
    assert abs(rate.p_XL - exact) < 4 * sigma + 2 * rate.p_XL_analytic**2
    assert rate.x_frame_shots > 0


@pytest.mark.parametrize("kind", ["memory", "CNOT_transversal", "Toffoli_pieceable"])
def test_first_order_x_rate_is_below_location_count(kind):
    circ = logical_gadget(kind, RepCodeParams(n=3, r=1, p_x=1e-4))
    exact = first_order_x_rate(circ)
    assert 0 < exact <= x_locations(circ) * 1e-4


@pytest.mark.parametrize("kind,n,r", [
    ("memory", 3, 2), ("memory", 5, 3), ("CNOT_transversal", 5, 3), ("Toffoli_pieceable", 3, 2),
])
def test_weighted_matching_not_worse_than_majority(kind, n, r):
    circ = logical_gadget(kind, RepCodeParams(n=n, r=r, **Z_ONLY))
    w = sample(circ, 20_000, seed=9, decoder="weighted")
    mj = sample(circ, 20_000, seed=9, decoder="majority")
    assert w.z_fail <= mj.z_fail


def test_uniform_matching_beats_majority_at_distance_five():
    params = RepCodeParams(n=5, r=3, p_idle=0.02, p_meas=0.02)
    circ = memory_circuit(params)
    mw = sample(circ, 50_000, seed=9, decoder="mwpm")
    mj = sample(circ, 50_000, seed=9, decoder="majority")
    assert mw.z_fail <= mj.z_fail


def test_weighted_decoder_needs_params():
    from catsim.qec import FaultCircuit
    with pytest.raises(ValueError):
        sample(FaultCircuit(), 10, seed=0, decoder="weighted")


def test_reproducible_and_thread_independent():
    params = RepCodeParams(n=3, r=2, **Z_ONLY)
    circ = logical_gadget("Toffoli_pieceable", params)
    shots = 2 * CHUNK + 100
    a = sample(circ, shots, seed=42)
    b = sample(circ, shots, seed=42, threads=2)
    assert a == b
    c = sample(circ, shots, seed=43)
    assert c != a
    r1 = rates_to_csv([logical_error_rate(circ, params, 5000, seed=3)])
    r2 = rates_to_csv([logical_error_rate(circ, params, 5000, seed=3)])
    assert r1 == r2
    assert r1.splitlines()[0].startswith("gadget,n,r,shots,seed")
    assert chunk_rng(1, 2).random() == chunk_rng(1, 2).random()
    with pytest.raises(ValueError):
        sample(circ, 0, seed=1)


def test_logical_actions():
    assert logical_cnot_check() < 1e-12
    assert logical_toffoli_check(3) < 1e-12
    worst = hadamard_gadget_logical_check()
    assert set(worst) == {"0", "1", "+", "-", "+i"}
    assert max(worst.values()) < 1e-12


def test_scaling_fit_and_extrapolation():
    ns = [3, 5, 7]
    rates = [2e-3 * 0.2 ** ((n + 1) / 2 - 2) for n in ns]
    fit = below_threshold_fit(ns, rates)
    assert fit.suppression_factor == pytest.approx(5)
    ext = fit.extrapolate(11)
    assert ext["label"] == "extrapolation"
    assert ext["p_L"] == pytest.approx(2e-3 * 0.2**4)
    n = qubits_for_target(fit, 1e-9)
    assert n % 2 == 1
    assert fit.extrapolate(n)["p_L"] <= 1e-9 < fit.extrapolate(n - 2)["p_L"]
    with pytest.raises(ValueError):
        below_threshold_fit([3], [1e-3])
    with pytest.raises(ValueError):
        qubits_for_target(below_threshold_fit([3, 5], [1e-3, 2e-3]), 1e-9)
