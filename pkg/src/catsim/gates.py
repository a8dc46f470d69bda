"""Dissipators and Hamiltonians of the bias-preserving cat-qubit operations.

Every constructor returns a :class:`~catsim.lindblad.GateSchedule`.  Amplitudes
are taken real and positive.  Modes are ordered as in the argument list; the
first mode of a CNOT or Toffoli schedule is the (first) control.
"""

from __future__ import annotations

import cmath
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fock
from .fock import CatQubitParams
from .lindblad import GateSchedule, TimeDependentOperator

PHASE_MODES = ("frame", "drive")
DEFAULT_MISASSIGNMENT = 0.015


@dataclass(frozen=True)
class NoiseSpec:
    """Per-mode loss, thermal excitation and dephasing rates."""

    kappa1: float = 0.0
    n_th: float = 0.0
    kappa_phi: float = 0.0

    def __post_init__(self):
        for name in ("kappa1", "n_th", "kappa_phi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def from_params(cls, params: CatQubitParams) -> "NoiseSpec":
        return cls(params.kappa1, params.n_th, params.kappa_phi)

    @property
    def is_zero(self) -> bool:
        return self.kappa1 == 0 and self.kappa_phi == 0

    def dissipators(self, a) -> list:
        """(rate, L) pairs for one mode with annihilation operator ``a``."""
        out = []
        if self.kappa1 * (1 + self.n_th) > 0:
            out.append((self.kappa1 * (1 + self.n_th), TimeDependentOperator.constant(a, "loss")))
        if self.kappa1 * self.n_th > 0:
            out.append((self.kappa1 * self.n_th,
                        TimeDependentOperator.constant(a.conj().T, "thermal")))
        if self.kappa_phi > 0:
            n = sp.csr_array(a.conj().T @ a)
            out.append((self.kappa_phi, TimeDependentOperator.constant(n, "dephasing")))
        return out


def _real_alpha(params: CatQubitParams) -> float:
    alpha = complex(params.alpha)
    if abs(alpha.imag) > 1e-12 or alpha.real < 0:
        raise ValueError("gate constructors assume a real non-negative amplitude alpha")
    return alpha.real


def _check_equal_alpha(*params):
    alphas = [_real_alpha(p) for p in params]
    if max(alphas) - min(alphas) > 1e-12:
        raise ValueError(f"all modes must share the same |alpha|, got {alphas}")
    kappas = {p.kappa2 for p in params}
    if len(kappas) != 1:
        raise ValueError("all modes must share the same kappa2")
    return alphas[0]


def _dims(params_list, dim):
    if dim is None:
        dims = [fock.default_truncation(p.alpha) for p in params_list]
    elif isinstance(dim, (list, tuple)):
        dims = [int(d) for d in dim]
    else:
        dims = [int(dim)] * len(params_list)
    if len(dims) != len(params_list):
        raise ValueError("one truncation per mode is required")
    for d in dims:
        fock.ModeSpace(d)
    return tuple(dims)


def _noise_terms(params_list, ops, noise):
    out = []
    for k, (p, a) in enumerate(zip(params_list, ops)):
        spec = noise[k] if isinstance(noise, (list, tuple)) else noise
        spec = NoiseSpec.from_params(p) if spec is None else spec
        out.extend(spec.dissipators(a))
    return out


def _identity(d):
    return sp.csr_array(sp.identity(d, dtype=complex, format="csr"))


def _two_photon(a, alpha, d):
    return sp.csr_array(a @ a - alpha**2 * _identity(d))


def _rotation(T):
    w = 2 * math.pi / T
    return lambda t: cmath.exp(1j * w * t)


def _one_minus_rotation(T, scale=1.0):
    w = 2 * math.pi / T
    return lambda t: scale * (1 - cmath.exp(1j * w * t))


def _hermitian_part(op):
    return sp.csr_array(op + op.conj().T)


def _wrap_phase(phi: float) -> float:
    """Map to (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    return math.pi if math.isclose(w, -math.pi) else w


def _zeno_z_projector(a, alpha, d):
    """-(a + a^dag - 2 alpha)/(4 alpha): Zeno-projects to |1>_c<1|_c."""
    return sp.csr_array(-(a + a.conj().T - 2 * alpha * _identity(d)) / (4 * alpha))


def idle_schedule(params: CatQubitParams, T: float, noise: NoiseSpec | None = None,
                  dim: int | None = None) -> GateSchedule:
    """Two-photon stabilisation kappa2 D[a^2 - alpha^2] plus noise."""
    alpha = _real_alpha(params)
    dims = _dims([params], dim)
    a = fock.destroy(dims[0])
    diss = [(params.kappa2, TimeDependentOperator.constant(_two_photon(a, alpha, dims[0]), "L_a"))]
    diss += _noise_terms([params], [a], noise)
    info = {"gate": "idle", "params": [params.to_dict()], "T": T, "dims": list(dims)}
    return GateSchedule(T, dims, None, diss, "idle", info)


def z_rotation_duration(params: CatQubitParams, theta: float, epsilon_Z: float) -> float:
    """Zeno rotation time |theta| / (2 Omega_Z) with Omega_Z = 2 eps_Z |alpha|."""
    return abs(theta) / (2 * 2 * epsilon_Z * abs(params.alpha))


def z_rotation_schedule(params: CatQubitParams, theta: float, epsilon_Z: float,
                        noise: NoiseSpec | None = None, dim: int | None = None) -> GateSchedule:
    """Z(theta) = exp(i theta Z / 2) through a weak drive eps (a + a^dag) under stabilisation.

    The drive sign is chosen opposite to theta so that the Zeno-projected
    Hamiltonian 2 eps alpha Z produces the requested rotation.  theta = 0 gives
    a vanishing-duration identity, represented by a 1e-12 idle.
    """
    alpha = _real_alpha(params)
    if alpha == 0:
        raise ValueError("Z rotation needs alpha != 0")
    if not epsilon_Z > 0:
        raise ValueError("epsilon_Z must be positive")
    if epsilon_Z / params.kappa2 > 0.1:
        warnings.warn("epsilon_Z / kappa2 > 0.1: Zeno approximation is poor", stacklevel=2)
    dims = _dims([params], dim)
    d = dims[0]
    a = fock.destroy(d)
    T = z_rotation_duration(params, theta, epsilon_Z) if theta != 0 else 1e-12
    drive = -math.copysign(epsilon_Z, theta) if theta != 0 else 0.0
    H = TimeDependentOperator.constant(drive * _hermitian_part(a), "H_Z")
    diss = [(params.kappa2, TimeDependentOperator.constant(_two_photon(a, alpha, d), "L_a"))]
    diss += _noise_terms([params], [a], noise)
    info = {"gate": "z_rotation", "params": [params.to_dict()], "theta": theta,
            "epsilon_Z": epsilon_Z, "T": T, "dims": list(dims)}
    return GateSchedule(T, dims, H, diss, "z_rotation", info)


def x_gate_schedule(params: CatQubitParams, T: float, feedforward: bool = True,
                    noise: NoiseSpec | None = None, dim: int | None = None) -> GateSchedule:
    """X gate: the pump phase rotates by 2 pi, so |alpha> follows to |-alpha>."""
    alpha = _real_alpha(params)
    if not feedforward and T * params.kappa2 < 5:
        raise ValueError("without feedforward the X gate needs T >= 5 / kappa2")
    dims = _dims([params], dim)
    d = dims[0]
    a = fock.destroy(d)
    L = TimeDependentOperator(
        [(1.0, sp.csr_array(a @ a)), (lambda t, r=_rotation(T): -(alpha**2) * r(t), _identity(d))],
        "L_a(t)",
    )
    diss = [(params.kappa2, L)] + _noise_terms([params], [a], noise)
    H = None
    if feedforward:
        H = TimeDependentOperator.constant(-(math.pi / T) * fock.number(d), "H_ff")
    info = {"gate": "x", "params": [params.to_dict()], "T": T, "feedforward": feedforward,
            "dims": list(dims)}
    return GateSchedule(T, dims, H, diss, "x", info)


def geometric_phase(params: CatQubitParams) -> float:
    """Deterministic phase pi |alpha|^2 picked up by the rotated branch."""
    return math.pi * params.nbar


def cnot_schedule(params_control: CatQubitParams, params_target: CatQubitParams, T: float,
                  feedforward: bool = True, phase_compensation: str = "frame",
                  noise=None, dim=None) -> GateSchedule:
    """CNOT with control mode a and target mode b.

    L_b(t) = b^2 - alpha^2 - (alpha/2)(1 - e^{2 i pi t/T})(a - alpha) rotates the
    target pump only on the |-alpha> control branch.  ``phase_compensation``
    selects how the control phase exp(-i pi nbar) is handled: ``'frame'`` keeps
    it and folds it into the reference unitary, ``'drive'`` cancels it with a
    Zeno Z drive on the control.
    """
    if phase_compensation not in PHASE_MODES:
        raise ValueError(f"phase_compensation must be one of {PHASE_MODES}")
    alpha = _check_equal_alpha(params_control, params_target)
    if alpha == 0:
        raise ValueError("CNOT needs alpha != 0")
    if not T > 0:
        raise ValueError("T must be positive")
    plist = [params_control, params_target]
    dims = _dims(plist, dim)
    a, b = fock.mode_operators(dims)
    d = int(np.prod(dims))
    Id = _identity(d)
    nbar = alpha**2
    kappa2 = params_control.kappa2
    am = sp.csr_array(a - alpha * Id)
    L_a = TimeDependentOperator.constant(_two_photon(a, alpha, d), "L_a")
    L_b = TimeDependentOperator(
        [(1.0, sp.csr_array(b @ b - alpha**2 * Id)),
         (_one_minus_rotation(T, -alpha / 2), am)],
        "L_b(t)",
    )
    diss = [(kappa2, L_a), (kappa2, L_b)] + _noise_terms(plist, [a, b], noise)
    H = None
    h_terms = []
    if feedforward:
        nb = sp.csr_array(b.conj().T @ b - nbar * Id)
        ff = 0.5 * (math.pi / T) * (am / (2 * alpha)) @ nb
        h_terms.append((1.0, _hermitian_part(ff)))
    if phase_compensation == "drive":
        phi = _wrap_phase(math.pi * nbar)
        if phi != 0:
            h_terms.append((-phi / T, _zeno_z_projector(a, alpha, d)))
    if h_terms:
        H = TimeDependentOperator(h_terms, "H")
    info = {"gate": "cnot", "params": [p.to_dict() for p in plist], "T": T,
            "feedforward": feedforward, "phase_compensation": phase_compensation,
            "dims": list(dims)}
    return GateSchedule(T, dims, H, diss, "cnot", info)


def toffoli_schedule(params_a: CatQubitParams, params_b: CatQubitParams, params_c: CatQubitParams,
                     T: float, feedforward: bool = True, phase_compensation: str = "frame",
                     noise=None, dim=None) -> GateSchedule:
    """Toffoli with controls a, b and target c.

    L_c(t) = c^2 - alpha^2 + (1/4)(1 - e^{2 i pi t/T})(a - alpha)(b - alpha).
    The phase exp(-i pi nbar) lands on the controls' |11> branch; ``'drive'``
    compensation cancels it with the Zeno-projected |11><11| Hamiltonian.
    """
    if phase_compensation not in PHASE_MODES:
        raise ValueError(f"phase_compensation must be one of {PHASE_MODES}")
    alpha = _check_equal_alpha(params_a, params_b, params_c)
    if alpha == 0:
        raise ValueError("Toffoli needs alpha != 0")
    if not T > 0:
        raise ValueError("T must be positive")
    plist = [params_a, params_b, params_c]
    dims = _dims(plist, dim)
    a, b, c = fock.mode_operators(dims)
    d = int(np.prod(dims))
    Id = _identity(d)
    nbar = alpha**2
    kappa2 = params_a.kappa2
    am = sp.csr_array(a - alpha * Id)
    bm = sp.csr_array(b - alpha * Id)
    ab = sp.csr_array(am @ bm)
    L_c = TimeDependentOperator(
        [(1.0, sp.csr_array(c @ c - alpha**2 * Id)), (_one_minus_rotation(T, 0.25), ab)],
        "L_c(t)",
    )
    diss = [
        (kappa2, TimeDependentOperator.constant(_two_photon(a, alpha, d), "L_a")),
        (kappa2, TimeDependentOperator.constant(_two_photon(b, alpha, d), "L_b")),
        (kappa2, L_c),
    ] + _noise_terms(plist, [a, b, c], noise)
    h_terms = []
    proj11 = ab / (4 * alpha**2)
    if feedforward:
        nc = sp.csr_array(c.conj().T @ c - nbar * Id)
        ff = -0.5 * (math.pi / T) * proj11 @ nc
        h_terms.append((1.0, _hermitian_part(ff)))
    if phase_compensation == "drive":
        phi = _wrap_phase(math.pi * nbar)
        if phi != 0:
            h_terms.append((-phi / T, sp.csr_array(_hermitian_part(proj11) / 2)))
    H = TimeDependentOperator(h_terms, "H") if h_terms else None
    info = {"gate": "toffoli", "params": [p.to_dict() for p in plist], "T": T,
            "feedforward": feedforward, "phase_compensation": phase_compensation,
            "dims": list(dims)}
    return GateSchedule(T, dims, H, diss, "toffoli", info)


def cz_theta_duration(params: CatQubitParams, theta: float, epsilon_ZZ: float) -> float:
    """Zeno time |theta| / (4 eps_ZZ nbar) for exp(i theta Z1 Z2 / 2)."""
    return abs(theta) / (4 * epsilon_ZZ * params.nbar)


def cz_theta_schedule(params_1: CatQubitParams, params_2: CatQubitParams, theta: float,
                      epsilon_ZZ: float, noise=None, dim=None) -> GateSchedule:
    """CZ(theta) = exp(i theta Z1 Z2 / 2) from a weak beam splitter under stabilisation."""
    alpha = _check_equal_alpha(params_1, params_2)
    if alpha == 0:
        raise ValueError("CZ(theta) needs alpha != 0")
    if not epsilon_ZZ > 0:
        raise ValueError("epsilon_ZZ must be positive")
    if epsilon_ZZ / params_1.kappa2 > 0.1:
        warnings.warn("epsilon_ZZ / kappa2 > 0.1: Zeno approximation is poor", stacklevel=2)
    plist = [params_1, params_2]
    dims = _dims(plist, dim)
    a, b = fock.mode_operators(dims)
    d = int(np.prod(dims))
    T = cz_theta_duration(params_1, theta, epsilon_ZZ) if theta != 0 else 1e-12
    coupling = -math.copysign(epsilon_ZZ, theta) if theta != 0 else 0.0
    H = TimeDependentOperator.constant(coupling * _hermitian_part(a @ b.conj().T), "H_bs")
    diss = [
        (params_1.kappa2, TimeDependentOperator.constant(_two_photon(a, alpha, d), "L_a")),
        (params_2.kappa2, TimeDependentOperator.constant(_two_photon(b, alpha, d), "L_b")),
    ] + _noise_terms(plist, [a, b], noise)
    info = {"gate": "cz_theta", "params": [p.to_dict() for p in plist], "theta": theta,
            "epsilon_ZZ": epsilon_ZZ, "T": T, "dims": list(dims)}
    return GateSchedule(T, dims, H, diss, "cz_theta", info)


# ----------------------------------------------------------- ideal targets

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)


def cnot_matrix() -> np.ndarray:
    return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def toffoli_matrix() -> np.ndarray:
    U = np.eye(8, dtype=complex)
    U[6:, 6:] = _X
    return U


def ideal_unitary(schedule: GateSchedule) -> np.ndarray:
    """Code-space target of a schedule in the |0>_c, |1>_c product basis.

    With ``'frame'`` phase compensation the geometric phase is part of the
    reference, so the returned matrix is the gate actually aimed at.
    """
    info = schedule.info
    gate = info.get("gate")
    if gate == "idle":
        return np.eye(2, dtype=complex)
    if gate == "x":
        return _X.copy()
    if gate == "z_rotation":
        th = info["theta"]
        return np.diag([np.exp(1j * th / 2), np.exp(-1j * th / 2)])
    if gate == "cz_theta":
        th = info["theta"]
        zz = np.array([1, -1, -1, 1])
        return np.diag(np.exp(1j * th / 2 * zz))
    nbar = CatQubitParams.from_dict(info["params"][0]).nbar
    phase = np.exp(-1j * math.pi * nbar) if info.get("phase_compensation") == "frame" else 1.0
    if gate == "cnot":
        return cnot_matrix() @ np.diag([1, 1, phase, phase])
    if gate == "toffoli":
        return toffoli_matrix() @ np.diag([1, 1, 1, 1, 1, 1, phase, phase])
    raise ValueError(f"no ideal unitary for gate {gate!r}")


# --------------------------------------------------------------- JSON I/O


def schedule_to_json(schedule: GateSchedule) -> str:
    return json.dumps(schedule.info, sort_keys=True)


def schedule_from_json(text_or_dict) -> GateSchedule:
    """Rebuild a schedule from its JSON description."""
    info = json.loads(text_or_dict) if isinstance(text_or_dict, str) else dict(text_or_dict)
    gate = info["gate"]
    params = [CatQubitParams.from_dict(p) for p in info["params"]]
    dims = info.get("dims")
    if gate == "idle":
        return idle_schedule(params[0], info["T"], dim=dims)
    if gate == "x":
        return x_gate_schedule(params[0], info["T"], info.get("feedforward", True), dim=dims)
    if gate == "z_rotation":
        return z_rotation_schedule(params[0], info["theta"], info["epsilon_Z"], dim=dims)
    if gate == "cz_theta":
        return cz_theta_schedule(params[0], params[1], info["theta"], info["epsilon_ZZ"], dim=dims)
    if gate == "cnot":
        return cnot_schedule(params[0], params[1], info["T"], info.get("feedforward", True),
                             info.get("phase_compensation", "frame"), dim=dims)
    if gate == "toffoli":
        return toffoli_schedule(params[0], params[1], params[2], info["T"],
                                info.get("feedforward", True),
                                info.get("phase_compensation", "frame"), dim=dims)
    raise ValueError(f"unknown gate {gate!r}")


# ---------------------------------------------------------- measurement


@dataclass(frozen=True)
class MeasurementOutcome:
    value: int
    post_state: np.ndarray
    probability: float


def _parity_projector(dims, mode, sign):
    par = fock.parity_operator(dims[mode])
    single = sp.csr_array((fock.identity(dims[mode]) + sign * par) / 2)
    return fock.embed(single, mode, dims)


def project_parity(rho, mode: int, dims, value: int) -> MeasurementOutcome:
    """Branch of a projective parity measurement with outcome ``value`` (+1 or -1)."""
    if value not in (1, -1):
        raise ValueError("parity outcome must be +1 or -1")
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    P = _parity_projector(tuple(dims), mode, value)
    post = np.asarray(P @ (P @ rho).T).T
    prob = float(np.real(np.trace(post)))
    if prob <= 1e-14:
        raise ValueError(f"parity outcome {value:+d} has zero probability")
    return MeasurementOutcome(value, post / prob, prob)


def parity_branches(rho, mode: int, dims) -> dict:
    """Both outcomes with their probabilities; impossible outcomes are omitted."""
    out = {}
    for v in (1, -1):
        try:
            out[v] = project_parity(rho, mode, dims, v)
        except ValueError:
            continue
    return out


def measure_parity(rho, mode: int, dims, rng: np.random.Generator,
                   misassignment: float = DEFAULT_MISASSIGNMENT) -> MeasurementOutcome:
    """Sample a parity measurement; the reported value is flipped w.p. ``misassignment``."""
    branches = parity_branches(rho, mode, dims)
    p_plus = branches[1].probability if 1 in branches else 0.0
    true_value = 1 if rng.random() < p_plus else -1
    outcome = branches[true_value]
    reported = -true_value if rng.random() < misassignment else true_value
    return MeasurementOutcome(reported, outcome.post_state, outcome.probability)
