"""Closed-form phase-error channels of the cat-qubit CNOT and Toffoli gates.

Rates are expressed through nbar, kappa1, kappa2 and the gate time T.  Kraus
operators act on the qubit level in the |0>_c, |1>_c product basis, with the
first factor being the (first) control.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .fock import CatQubitParams

# Proportionality constant of the nonadiabatic control phase-flip rate (numerical fit value).
NONADIABATIC_CONSTANT = 2 * math.pi
R_ANGLE = 0.5 * math.asin(2 / math.pi)

_I = np.eye(2, dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)


class ModelValidityError(ValueError):
    """The first-order error model is outside its range of validity."""


def _kron(*ops):
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


@dataclass
class KrausSet:
    operators: list
    completed: bool = False

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def completeness(self) -> np.ndarray:
        return sum(M.conj().T @ M for M in self.operators)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(M @ rho @ M.conj().T for M in self.operators)

    def complete(self) -> "KrausSet":
        """Append M0 = sqrt(I - sum M^dag M)."""
        if self.completed:
            return self
        S = self.completeness()
        w, v = np.linalg.eigh((S + S.conj().T) / 2)
        if w.max() > 1 + 1e-12:
            raise ModelValidityError(f"sum of M^dag M has eigenvalue {w.max():.4g} > 1")
        M0 = v @ np.diag(np.sqrt(np.clip(1 - w, 0, None))) @ v.conj().T
        ops = [M0] + list(self.operators) if np.abs(M0).max() > 0 else list(self.operators)
        return KrausSet(ops, True)

    def to_json(self) -> str:
        return json.dumps({
            "completed": self.completed,
            "re": [M.real.tolist() for M in self.operators],
            "im": [M.imag.tolist() for M in self.operators],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "KrausSet":
        d = json.loads(text)
        ops = [np.array(r) + 1j * np.array(i) for r, i in zip(d["re"], d["im"])]
        return cls(ops, d["completed"])


@dataclass
class GateErrorBudget:
    """Pauli phase-error probabilities of one gate, split by source."""

    p_Z1: float = 0.0
    p_Z2: float = 0.0
    p_Z3: float = 0.0
    p_Z1Z2: float = 0.0
    p_Z1Z3: float = 0.0
    p_Z2Z3: float = 0.0
    p_Z1Z2Z3: float = 0.0
    coherences: dict = field(default_factory=dict)
    photon_loss: dict = field(default_factory=dict)
    nonadiabatic: dict = field(default_factory=dict)

    PAULI_KEYS = ("p_Z1", "p_Z2", "p_Z3", "p_Z1Z2", "p_Z1Z3", "p_Z2Z3", "p_Z1Z2Z3")

    def __post_init__(self):
        for key in self.PAULI_KEYS:
            v = getattr(self, key)
            if not 0 <= v <= 1:
                raise ModelValidityError(f"{key}={v:.4g} outside [0, 1]")
        if self.total >= 1:
            raise ModelValidityError(f"total error probability {self.total:.4g} >= 1")

    @property
    def total(self) -> float:
        return float(sum(getattr(self, k) for k in self.PAULI_KEYS))

    def probabilities(self) -> dict:
        return {k: getattr(self, k) for k in self.PAULI_KEYS}

    def to_json(self) -> str:
        d = asdict(self)
        d["coherences"] = {k: [v.real, v.imag] for k, v in self.coherences.items()}
        return json.dumps(d, sort_keys=True)


def _loss(params: CatQubitParams, T: float) -> float:
    return params.nbar * params.kappa1 * T


def nonadiabatic_cnot(params: CatQubitParams, T: float) -> float:
    """(2 pi nbar kappa2 T)^-1 control phase-flip probability."""
    return 1.0 / (NONADIABATIC_CONSTANT * params.nbar * params.kappa2 * T)


def nonadiabatic_toffoli(params: CatQubitParams, T: float) -> float:
    """(4 pi nbar kappa2 T)^-1, assigned to each of Z1, Z2 and Z1Z2."""
    return 1.0 / (2 * NONADIABATIC_CONSTANT * params.nbar * params.kappa2 * T)


def cnot_error_budget(params: CatQubitParams, T: float) -> GateErrorBudget:
    """p_Z1 = nbar k1 T + (2 pi nbar k2 T)^-1, p_Z2 = p_Z1Z2 = nbar k1 T / 2.

    The coherence between the Z2 and Z1Z2 errors is chi[Z2, Z1Z2] = -i nbar k1 T / pi.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    loss = _loss(params, T)
    na = nonadiabatic_cnot(params, T)
    coh = -1j * loss / math.pi
    return GateErrorBudget(
        p_Z1=loss + na,
        p_Z2=loss / 2,
        p_Z1Z2=loss / 2,
        coherences={"Z2,Z1Z2": coh, "Z1Z2,Z2": coh.conjugate()},
        photon_loss={"p_Z1": loss, "p_Z2": loss / 2, "p_Z1Z2": loss / 2},
        nonadiabatic={"p_Z1": na},
    )


def toffoli_error_budget(params: CatQubitParams, T: float) -> GateErrorBudget:
    """Twirled Toffoli budget.

    Control losses give Z1 and Z2 with probability nbar k1 T each.  A target loss
    splits into Z3 (5/8), Z1Z3, Z2Z3 and Z1Z2Z3 (1/8 each) of nbar k1 T.  The
    nonadiabatic part adds (4 pi nbar k2 T)^-1 to each of Z1, Z2 and Z1Z2.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    loss = _loss(params, T)
    na = nonadiabatic_toffoli(params, T)
    return GateErrorBudget(
        p_Z1=loss + na,
        p_Z2=loss + na,
        p_Z1Z2=na,
        p_Z3=5 * loss / 8,
        p_Z1Z3=loss / 8,
        p_Z2Z3=loss / 8,
        p_Z1Z2Z3=loss / 8,
        photon_loss={"p_Z1": loss, "p_Z2": loss, "p_Z3": 5 * loss / 8, "p_Z1Z3": loss / 8,
                     "p_Z2Z3": loss / 8, "p_Z1Z2Z3": loss / 8},
        nonadiabatic={"p_Z1": na, "p_Z2": na, "p_Z1Z2": na},
    )


def cnot_kraus(params: CatQubitParams, T: float, complete: bool = True) -> KrausSet:
    """Photon-loss Kraus operators of the CNOT (after the ideal gate), plus completion."""
    loss = _loss(params, T)
    if loss >= 1:
        raise ModelValidityError("nbar kappa1 T must be below 1")
    c, s = math.cos(R_ANGLE), math.sin(R_ANGLE)
    Z1, Z2 = _kron(_Z, _I), _kron(_I, _Z)
    I4 = np.eye(4, dtype=complex)
    ops = [
        math.sqrt(loss) * Z1,
        math.sqrt(loss / 2) * (c * I4 + 1j * s * Z1) @ Z2,
        math.sqrt(loss / 2) * (s * I4 + 1j * c * Z1) @ Z2,
    ]
    ks = KrausSet(ops)
    return ks.complete() if complete else ks


def control_projector_11() -> np.ndarray:
    """(I - Z1 - Z2 + Z1 Z2)/4, the projector on the controls' |11>."""
    Z1, Z2 = _kron(_Z, _I), _kron(_I, _Z)
    return (np.eye(4) - Z1 - Z2 + Z1 @ Z2) / 4


def toffoli_kraus(params: CatQubitParams, T: float, complete: bool = True) -> KrausSet:
    """Photon-loss Kraus operators of the Toffoli (after the ideal gate), plus completion."""
    loss = _loss(params, T)
    if 3 * loss >= 1:
        raise ModelValidityError("3 nbar kappa1 T must be below 1")
    c, s = math.cos(R_ANGLE), math.sin(R_ANGLE)
    P = control_projector_11()
    Q = np.eye(4) - P
    Z1, Z2, Z3 = _kron(_Z, _I, _I), _kron(_I, _Z, _I), _kron(_I, _I, _Z)
    g = math.sqrt(loss)
    ops = [
        g * Z1,
        g * Z2,
        g * np.kron(c * Q - 1j * s * P, _I) @ Z3,
        g * np.kron(s * Q - 1j * c * P, _I) @ Z3,
    ]
    ks = KrausSet(ops)
    return ks.complete() if complete else ks


def optimal_gate_time(params: CatQubitParams) -> float:
    """T* = [2 nbar sqrt(pi k1/k2)]^-1 / k2, shared by CNOT and Toffoli."""
    if params.kappa1 <= 0:
        raise ValueError("optimal gate time needs kappa1 > 0")
    ratio = params.kappa1 / params.kappa2
    return 1.0 / (2 * params.nbar * math.sqrt(math.pi * ratio) * params.kappa2)


def predicted_fidelity(gate: str, params: CatQubitParams, T: float | None = None) -> float:
    """sqrt(1 - total phase-error probability); closed form at T* when T is None."""
    gate = gate.lower()
    if gate not in ("cnot", "toffoli"):
        raise ValueError("gate must be 'cnot' or 'toffoli'")
    if T is None:
        if params.kappa1 <= 0:
            raise ValueError("optimal fidelity needs kappa1 > 0")
        ratio = params.kappa1 / params.kappa2
        factor = 4 if gate == "cnot" else 9
        return math.sqrt(1 - math.sqrt(factor / math.pi * ratio))
    budget = cnot_error_budget(params, T) if gate == "cnot" else toffoli_error_budget(params, T)
    return math.sqrt(1 - budget.total)


def fidelity_grid_maximum(gate: str, params: CatQubitParams, T_grid) -> tuple[float, float]:
    """(T, F) at the maximum of sqrt(1 - budget total) over a T grid."""
    fids = [predicted_fidelity(gate, params, T) for T in T_grid]
    k = int(np.argmax(fids))
    return float(T_grid[k]), float(fids[k])


def suppression_fit(points) -> float:
    """Least-squares slope of ln p versus 2 nbar."""
    pts = [(float(n), float(p)) for n, p in points]
    if len(pts) < 3:
        raise ValueError("need at least three points")
    if any(p <= 0 for _, p in pts):
        raise ValueError("probabilities must be positive")
    x = np.array([2 * n for n, _ in pts])
    y = np.log([p for _, p in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def pauli_twirl(kraus: KrausSet) -> dict:
    """Diagonal Pauli weights of a Kraus channel, keyed by Pauli label."""
    from .tomography import kraus_to_chi, pauli_labels

    m = int(round(math.log2(kraus.dim)))
    chi = kraus_to_chi(kraus.operators)
    return {l: float(chi[k, k].real) for k, l in enumerate(pauli_labels(m))}
