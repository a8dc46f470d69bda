"""Logical error rates, fault enumerations and below-threshold fits."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .circuit import FaultCircuit, RepCodeParams, logical_gadget
from .simulate import run_branches, sample


@dataclass
class LogicalRate:
    gadget: str
    n: int
    r: int
    shots: int
    seed: int
    decoder: str
    p_ZL: float
    stderr_ZL: float
    p_XL: float
    stderr_XL: float
    p_XL_analytic: float
    z_failures: int
    x_failures: int
    x_frame_shots: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def binomial_stderr(k: int, shots: int) -> float:
    p = k / shots
    return math.sqrt(p * (1 - p) / shots)


def x_locations(circ: FaultCircuit) -> int:
    return sum(1 for loc in circ.locations if loc.kind.endswith("_x"))


def logical_error_rate(gadget: str, params: RepCodeParams, shots: int, seed: int,
                       decoder: str = "mwpm", threads: int = 1, **kwargs) -> LogicalRate:
    """Monte-Carlo p_ZL and p_XL with binomial standard errors.

    The analytic bit-flip estimate counts every X-capable location once, since
    the code neither detects nor corrects bit flips. This is an upper bound:
    an ancilla flip copied onto two data qubits of one block leaves the
    majority readout intact. ``first_order_x_rate`` gives the exact
    first-order value for small circuits.
    """
    circ = gadget if isinstance(gadget, FaultCircuit) else logical_gadget(gadget, params, **kwargs)
    counts = sample(circ, shots, seed, decoder=decoder, threads=threads)
    n_x = x_locations(circ)
    return LogicalRate(
        gadget=circ.name, n=params.n, r=params.r, shots=shots, seed=int(seed), decoder=decoder,
        p_ZL=counts.z_fail / shots, stderr_ZL=binomial_stderr(counts.z_fail, shots),
        p_XL=counts.x_fail / shots, stderr_XL=binomial_stderr(counts.x_fail, shots),
        p_XL_analytic=n_x * params.p_x, z_failures=counts.z_fail, x_failures=counts.x_fail,
        x_frame_shots=counts.x_seen,
    )


def rates_to_csv(rates) -> str:
    """Deterministic CSV text of a list of LogicalRate records."""
    rows = [r.to_dict() for r in rates]
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# ------------------------------------------------------------------ enumeration


def _fault_options(circ: FaultCircuit):
    return [(i, k, o[0]) for i, loc in enumerate(circ.locations) for k, o in enumerate(loc.outcomes)]


def failure_probability(circ: FaultCircuit, faults: dict, decoder: str = "mwpm") -> float:
    """Probability over twirl branches that the prescribed faults cause a logical failure."""
    return sum(p for p, res in run_branches(circ, faults, decoder) if res.failed)


def single_fault_failures(circ: FaultCircuit, decoder: str = "mwpm") -> list:
    """(location, outcome, failing branch weight) for every single fault that can fail."""
    bad = []
    for i, k, _ in _fault_options(circ):
        w = failure_probability(circ, {i: k}, decoder)
        if w > 0:
            bad.append((i, k, w))
    return bad


def minimum_failing_faults(circ: FaultCircuit, max_faults: int = 2, decoder: str = "mwpm"):
    """Smallest number of faults with a failing branch, or None if none up to ``max_faults``."""
    if not failure_probability(circ, {}, decoder) == 0:
        return 0
    opts = _fault_options(circ)
    for k in range(1, max_faults + 1):
        for combo in itertools.combinations(range(len(opts)), k):
            locs = [opts[c][0] for c in combo]
            if len(set(locs)) < k:
                continue
            if failure_probability(circ, {opts[c][0]: opts[c][1] for c in combo}, decoder) > 0:
                return k
    return None


def truncated_enumeration(circ: FaultCircuit, max_faults: int = 2, decoder: str = "mwpm"):
    """Exact logical failure probability restricted to at most ``max_faults`` faults.

    Returns (lower, upper): the contribution of fault patterns with up to
    ``max_faults`` faults, and that plus the total probability of all larger
    patterns.
    """
    locs = circ.locations
    p_none = np.array([1 - loc.probability for loc in locs])
    if np.any(p_none <= 0):
        raise ValueError("location probabilities must be below 1")
    base = float(np.prod(p_none))
    # probability mass with exactly k faults, by the Poisson-binomial recursion
    dist = np.zeros(max_faults + 2)
    dist[0] = 1.0
    for loc in locs:
        q = loc.probability
        new = dist * (1 - q)
        new[1:] += dist[:-1] * q
        dist = new
    covered = float(dist[: max_faults + 1].sum())
    lower = 0.0
    for k in range(0, max_faults + 1):
        for combo in itertools.combinations(range(len(locs)), k):
            weight = base
            for i in combo:
                weight /= p_none[i]
            for choice in itertools.product(*[range(len(locs[i].outcomes)) for i in combo]):
                w = weight
                for i, c in zip(combo, choice):
                    w *= locs[i].outcomes[c][0]
                if w == 0:
                    continue
                f = failure_probability(circ, dict(zip(combo, choice)), decoder)
                lower += w * f
    return lower, lower + (1 - covered)


def iid_memory_rate(n: int, p: float) -> float:
    """Exact logical rate of n-qubit majority decoding under iid flips (brute force)."""
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=n):
        w = sum(pattern)
        if 2 * w > n:
            total += p**w * (1 - p) ** (n - w)
    return total


# ----------------------------------------------------------------- extrapolation


@dataclass
class ScalingFit:
    """ln p_L = intercept + slope * (n + 1)/2, fitted below threshold."""

    intercept: float
    slope: float
    points: list

    @property
    def suppression_factor(self) -> float:
        return math.exp(-self.slope)

    def extrapolate(self, n: int) -> dict:
        value = math.exp(self.intercept + self.slope * (n + 1) / 2)
        return {"n": n, "p_L": value, "label": "extrapolation"}


def below_threshold_fit(ns, rates) -> ScalingFit:
    ns = [int(n) for n in ns]
    rates = [float(p) for p in rates]
    if len(ns) < 2 or len(ns) != len(rates):
        raise ValueError("need at least two (n, p_L) pairs")
    if any(p <= 0 for p in rates):
        raise ValueError("rates must be positive to fit")
    x = np.array([(n + 1) / 2 for n in ns])
    slope, intercept = np.polyfit(x, np.log(rates), 1)
    return ScalingFit(float(intercept), float(slope), list(zip(ns, rates)))


def qubits_for_target(fit: ScalingFit, target: float, per_block: int = 1) -> int:
    """Smallest odd n whose extrapolated rate is below ``target``."""
    if fit.slope >= 0:
        raise ValueError("rates do not decrease with n; not below threshold")
    d = (math.log(target) - fit.intercept) / fit.slope
    n = max(3, 2 * math.ceil(d) - 1)
    return n * per_block


# ------------------------------------------------------- ideal logical action


def hadamard_gadget_logical_check() -> dict:
    """Three-logical-qubit state vector walk of the Hadamard gadget.

    For each input psi on A, with B = |->, C = |+>: apply the Toffoli with
    controls (A, C) and target B, project A onto the X outcome m, apply X^m
    to C, and compare C with H psi.  Returns the worst infidelity per input.
    """
    s = 1 / math.sqrt(2)
    inputs = {"0": [1, 0], "1": [0, 1], "+": [s, s], "-": [s, -s], "+i": [s, 1j * s]}
    H = np.array([[1, 1], [1, -1]]) * s
    X = np.array([[0, 1], [1, 0]])
    tof = np.eye(8)
    # qubit order (A, B, C); flip B when A = C = 1
    for a, c in [(1, 1)]:
        i0 = a * 4 + 0 * 2 + c
        i1 = a * 4 + 1 * 2 + c
        tof[[i0, i1]] = tof[[i1, i0]]
    minus = np.array([s, -s])
    plus = np.array([s, s])
    out = {}
    for name, psi in inputs.items():
        psi = np.array(psi, dtype=complex)
        state = tof @ np.kron(np.kron(psi, minus), plus)
        worst = 0.0
        for m, xa in enumerate((plus, minus)):
            proj = np.tensordot(xa.conj(), state.reshape(2, 2, 2), axes=(0, 0))
            prob = np.linalg.norm(proj) ** 2
            if prob < 1e-14:
                continue
            # trace out B, which stays in |->
            c_state = np.tensordot(minus.conj(), proj / math.sqrt(prob), axes=(0, 0))
            c_state = np.linalg.matrix_power(X, m) @ c_state
            fid = abs(np.vdot(H @ psi, c_state)) ** 2
            worst = max(worst, 1 - fid)
        out[name] = worst
    return out


def logical_cnot_check() -> float:
    """Transversal CNOT on the code states equals the logical CNOT (returns max deviation).

    Logical |0>_L and |1>_L are the even and odd weight superpositions of
    physical Z-basis states; the check runs at n = 3 on 6 physical qubits.
    """
    n = 3
    zero = np.zeros(2**n)
    one = np.zeros(2**n)
    for k in range(2**n):
        (zero if bin(k).count("1") % 2 == 0 else one)[k] = 1
    zero /= np.linalg.norm(zero)
    one /= np.linalg.norm(one)
    code = [zero, one]
    dev = 0.0
    for a, b in itertools.product((0, 1), repeat=2):
        state = np.kron(code[a], code[b]).reshape([2] * (2 * n))
        for k in range(n):
            state = _apply_cnot(state, k, n + k)
        want = np.kron(code[a], code[a ^ b])
        dev = max(dev, np.linalg.norm(state.reshape(-1) - want))
    return float(dev)


def _apply_cnot(state, c, t):
    out = state.copy()
    idx1 = [slice(None)] * state.ndim
    idx1[c] = 1
    sub = out[tuple(idx1)]
    taxis = t - 1 if t > c else t
    out[tuple(idx1)] = np.flip(sub, axis=taxis)
    return out


def logical_toffoli_check(n: int = 3) -> float:
    """The n^2 physical Toffolis of the pieceable layout act as the logical Toffoli."""
    zero = np.zeros(2**n)
    one = np.zeros(2**n)
    for k in range(2**n):
        (zero if bin(k).count("1") % 2 == 0 else one)[k] = 1
    zero /= np.linalg.norm(zero)
    one /= np.linalg.norm(one)
    code = [zero, one]
    dev = 0.0
    for a, b, c in itertools.product((0, 1), repeat=3):
        state = np.kron(np.kron(code[a], code[b]), code[c]).reshape([2] * (3 * n))
        for i in range(n):
            for k in range(n):
                state = _apply_toffoli(state, i, n + k, 2 * n + k)
        want = np.kron(np.kron(code[a], code[b]), code[c ^ (a & b)])
        dev = max(dev, np.linalg.norm(state.reshape(-1) - want))
    return float(dev)


def _apply_toffoli(state, c1, c2, t):
    out = state.copy()
    idx = [slice(None)] * state.ndim
    idx[c1] = 1
    idx[c2] = 1
    sub = out[tuple(idx)]
    taxis = t - (c1 < t) - (c2 < t)
    out[tuple(idx)] = np.flip(sub, axis=taxis)
    return out


def first_order_x_rate(circ: FaultCircuit, decoder: str = "mwpm") -> float:
    """Sum over bit-flip locations of p times the failure probability of that single fault.

    Cost grows with the Toffoli twirl branching, so keep this to n <= 3 when
    the circuit contains Toffoli gates.
    """
    total = 0.0
    for i, loc in enumerate(circ.locations):
        if loc.kind.endswith("_x"):
            total += loc.probability * failure_probability(circ, {i: 0}, decoder)
    return total
