"""Process tomography of simulated gates restricted to the cat-qubit code space.

The channel is probed by evolving a Hermitian operator basis of the code space
(4^m runs batched through one integration), projecting every output onto the
code space, and assembling outputs for an informationally complete set of input
states by linearity.  The Pauli-basis process matrix follows by linear inversion.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import fock, gates, lindblad

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
LEAKAGE_FLAG = 0.05

_QUBIT_STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / math.sqrt(2),
    "-i": np.array([1, -1j], dtype=complex) / math.sqrt(2),
}
IC_LABELS = ("0", "1", "+", "+i")
PAULI_EIGEN_LABELS = ("0", "1", "+", "-", "+i", "-i")


class TomographyError(RuntimeError):
    pass


def pauli_labels(m: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=m)]


def pauli_matrix(label: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for ch in label:
        out = np.kron(out, PAULIS[ch])
    return out


def pauli_basis(m: int) -> list[np.ndarray]:
    return [pauli_matrix(lbl) for lbl in pauli_labels(m)]


def _kron_all(vecs):
    out = np.array([1.0 + 0j])
    for v in vecs:
        out = np.kron(out, v)
    return out


def input_labels(m: int, labels=IC_LABELS) -> list[tuple]:
    return list(itertools.product(labels, repeat=m))


def qubit_input_states(m: int, labels=IC_LABELS) -> list[np.ndarray]:
    return [_kron_all([_QUBIT_STATES[s] for s in combo]) for combo in input_labels(m, labels)]


def code_isometry(alpha, dims) -> np.ndarray:
    """Fock-space isometry whose columns are the code basis product states."""
    if isinstance(dims, int):
        dims = (dims,)
    V = np.array([[1.0 + 0j]])
    for d in dims:
        V = np.kron(V, fock.code_isometry(alpha, d))
    return V


def code_basis(alpha, m: int, dim: int | None = None, labels=IC_LABELS) -> list[np.ndarray]:
    """Product cat-qubit states |s_1>_c ... |s_m>_c for every label combination.

    The default labels {0, 1, +, +i} per mode give 4^m informationally
    complete inputs; ``PAULI_EIGEN_LABELS`` gives the 6^m Pauli eigenstates.
    """
    if m not in (1, 2, 3):
        raise ValueError("m must be 1, 2 or 3")
    dim = dim or fock.default_truncation(alpha)
    V1 = fock.code_isometry(alpha, dim)
    per_mode = {s: V1 @ _QUBIT_STATES[s] for s in labels}
    return [_kron_all([per_mode[s] for s in combo]) for combo in input_labels(m, labels)]


# ------------------------------------------------------ chi conversions


def _vec(M):
    return M.reshape(-1, order="F")


def _unvec(v, d):
    return v.reshape(d, d, order="F")


def superop_to_chi(S: np.ndarray) -> np.ndarray:
    """chi_mn with E(rho) = sum chi_mn P_m rho P_n^dag, from column-stacked S."""
    d = int(round(math.sqrt(S.shape[0])))
    m = int(round(math.log2(d)))
    basis = pauli_basis(m)
    n = len(basis)
    chi = np.empty((n, n), dtype=complex)
    for i, Pm in enumerate(basis):
        for j, Pn in enumerate(basis):
            chi[i, j] = np.vdot(np.kron(Pn.conj(), Pm), S) / d**2
    return chi


def chi_to_superop(chi: np.ndarray) -> np.ndarray:
    n = chi.shape[0]
    m = int(round(math.log(n, 4)))
    basis = pauli_basis(m)
    d = 2**m
    S = np.zeros((d * d, d * d), dtype=complex)
    for i, Pm in enumerate(basis):
        for j, Pn in enumerate(basis):
            if chi[i, j] != 0:
                S += chi[i, j] * np.kron(Pn.conj(), Pm)
    return S


def kraus_to_superop(kraus) -> np.ndarray:
    return sum(np.kron(K.conj(), K) for K in kraus)


def kraus_to_chi(kraus) -> np.ndarray:
    return superop_to_chi(kraus_to_superop(kraus))


def unitary_superop(U) -> np.ndarray:
    return np.kron(np.asarray(U).conj(), U)


def apply_chi(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    return _unvec(chi_to_superop(chi) @ _vec(rho), d)


def superop_from_io(inputs, outputs) -> np.ndarray:
    """Linear inversion S = Out In^-1 from matching density-matrix lists."""
    In = np.column_stack([_vec(r) for r in inputs])
    Out = np.column_stack([_vec(r) for r in outputs])
    if np.linalg.cond(In) > 1e10:
        raise TomographyError("input states are not informationally complete")
    return Out @ np.linalg.inv(In)


@dataclass
class ChiMatrix:
    data: np.ndarray
    m: int

    @property
    def labels(self) -> list[str]:
        return pauli_labels(self.m)

    def entry(self, row: str, col: str) -> complex:
        lbl = self.labels
        return complex(self.data[lbl.index(row), lbl.index(col)])

    def diagonal(self) -> dict:
        return {l: float(v.real) for l, v in zip(self.labels, np.diag(self.data))}

    def to_csv(self, path, header: dict | None = None) -> None:
        lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
        lines.append("row,col,re,im")
        for i, r in enumerate(self.labels):
            for j, c in enumerate(self.labels):
                z = self.data[i, j]
                lines.append(f"{r},{c},{z.real:.15e},{z.imag:.15e}")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


ErrorMatrix = ChiMatrix


def factor_ideal(chi, ideal_unitary) -> ChiMatrix:
    """Error matrix with E(rho) = sum chi_err_mn P_m (U rho U^dag) P_n^dag."""
    data = chi.data if isinstance(chi, ChiMatrix) else np.asarray(chi)
    m = int(round(math.log(data.shape[0], 4)))
    S = chi_to_superop(data)
    Su = unitary_superop(ideal_unitary)
    S_err = S @ Su.conj().T
    return ChiMatrix(superop_to_chi(S_err), m)


def _is_z_only(label: str) -> bool:
    return set(label) <= {"I", "Z"} and set(label) != {"I"}


def _is_x_type(label: str) -> bool:
    return any(ch in "XY" for ch in label)


@dataclass
class TomographyReport:
    chi: ChiMatrix
    chi_err: ChiMatrix
    leakage: dict
    gate_fidelity: float
    probabilities: dict
    flagged: bool = False
    info: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.chi.m

    def coherence(self, row: str, col: str) -> complex:
        return self.chi_err.entry(row, col)

    def to_dict(self) -> dict:
        lbl = self.chi.labels
        return {
            "m": self.m,
            "labels": lbl,
            "gate_fidelity": self.gate_fidelity,
            "probabilities": self.probabilities,
            "leakage": self.leakage,
            "flagged": self.flagged,
            "chi_re": self.chi.data.real.tolist(),
            "chi_im": self.chi.data.imag.tolist(),
            "chi_err_re": self.chi_err.data.real.tolist(),
            "chi_err_im": self.chi_err.data.imag.tolist(),
            "info": self.info,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def error_probabilities(chi_err: ChiMatrix) -> dict:
    """Diagonal phase-error weights and the total X/Y-type weight."""
    diag = chi_err.diagonal()
    out = {f"p_{l}": w for l, w in diag.items() if _is_z_only(l)}
    out = {_pretty(k): v for k, v in out.items()}
    out["p_X_type"] = float(sum(w for l, w in diag.items() if _is_x_type(l)))
    return out


def _pretty(key: str) -> str:
    """'p_IZ' -> 'p_Z2', 'p_ZZ' -> 'p_Z1Z2'."""
    label = key[2:]
    if len(label) == 1:
        return "p_Z"
    return "p_" + "".join(f"Z{k + 1}" for k, ch in enumerate(label) if ch == "Z")


def gate_fidelity(report_or_chi_err) -> float:
    """sqrt(1 - sum of diagonal phase-error weights)."""
    chi_err = report_or_chi_err.chi_err if isinstance(report_or_chi_err, TomographyReport) \
        else report_or_chi_err
    diag = chi_err.diagonal()
    rad = 1.0 - sum(w for l, w in diag.items() if _is_z_only(l))
    if rad < 0:
        raise TomographyError(f"negative fidelity radicand {rad:.3g}")
    return math.sqrt(rad)


def min_state_fidelity(chi_err: ChiMatrix, labels=PAULI_EIGEN_LABELS) -> float:
    """min over product Pauli eigenstates of sqrt(<psi| E_err(|psi><psi|) |psi>)."""
    S = chi_to_superop(chi_err.data)
    best = 1.0
    d = 2**chi_err.m
    for psi in qubit_input_states(chi_err.m, labels):
        rho = np.outer(psi, psi.conj())
        out = _unvec(S @ _vec(rho), d)
        best = min(best, math.sqrt(max(0.0, np.vdot(psi, out @ psi).real)))
    return best


def reconstruct(outputs_by_unit: dict, m: int, leakage_threshold: float = LEAKAGE_FLAG):
    """Build chi from projected outputs of every code matrix unit |i><j|.

    ``outputs_by_unit[(i, j)]`` is the 2^m x 2^m projected output.  Returns
    (chi, leakage per input label, S).
    """
    d = 2**m
    qin = qubit_input_states(m)
    labels = ["".join(c) if all(len(s) == 1 for s in c) else "|".join(c) for c in input_labels(m)]
    outs, ins, leak = [], [], {}
    for lbl, psi in zip(labels, qin):
        rho = np.outer(psi, psi.conj())
        out = np.zeros((d, d), dtype=complex)
        for i in range(d):
            for j in range(d):
                if rho[i, j] != 0:
                    out += rho[i, j] * outputs_by_unit[(i, j)]
        tr = np.trace(out).real
        leak[lbl] = float(1.0 - tr)
        if tr <= 0:
            raise TomographyError(f"input {lbl} leaked completely out of the code space")
        outs.append(out / tr)
        ins.append(rho)
    S = superop_from_io(ins, outs)
    return superop_to_chi(S), leak, S


def hermitian_unit_basis(V: np.ndarray):
    """Hermitian operators V h V^dag spanning the code operators, and the map back.

    Returns (ops, combine) where ``combine(evolved)`` yields the dict of
    evolved matrix units |v_i><v_j|.
    """
    d = V.shape[1]
    ops, keys = [], []
    for i in range(d):
        vi = V[:, i]
        ops.append(np.outer(vi, vi.conj()))
        keys.append(("d", i, i))
        for j in range(i + 1, d):
            vj = V[:, j]
            e = np.outer(vi, vj.conj())
            ops.append((e + e.conj().T) / 2)
            keys.append(("x", i, j))
            ops.append((e - e.conj().T) / 2j)
            keys.append(("y", i, j))

    def combine(evolved):
        by_key = dict(zip(keys, evolved))
        units = {}
        for i in range(d):
            units[(i, i)] = by_key[("d", i, i)]
            for j in range(i + 1, d):
                e = by_key[("x", i, j)] + 1j * by_key[("y", i, j)]
                units[(i, j)] = e
                units[(j, i)] = e.conj().T
        return units

    return np.array(ops), combine


def channel_on_code(schedule, alpha, dt: float | None = None):
    """Projected outputs of every code matrix unit and the raw evolved operators."""
    V = code_isometry(alpha, schedule.dims)
    ops, combine = hermitian_unit_basis(V)
    evolved = lindblad.propagate_operators(ops, schedule, dt=dt, hermitian=True)
    units = combine(list(evolved))
    return {k: V.conj().T @ v @ V for k, v in units.items()}


def process_tomography(schedule, alpha=None, m: int | None = None, dt: float | None = None,
                       ideal=None, leakage_threshold: float = LEAKAGE_FLAG) -> TomographyReport:
    """Tomography of ``schedule`` on the cat code space.

    ``ideal`` defaults to :func:`catsim.gates.ideal_unitary` of the schedule.
    """
    m = m or len(schedule.dims)
    if m != len(schedule.dims):
        raise ValueError("gate acts on a different number of modes")
    if alpha is None:
        alpha = fock.CatQubitParams.from_dict(schedule.info["params"][0]).alpha
    projected = channel_on_code(schedule, alpha, dt)
    chi, leak, _ = reconstruct(projected, m, leakage_threshold)
    U = gates.ideal_unitary(schedule) if ideal is None else ideal
    return build_report(chi, U, leak, leakage_threshold, dict(schedule.info))


def build_report(chi, U, leak, leakage_threshold=LEAKAGE_FLAG, info=None) -> TomographyReport:
    m = int(round(math.log(chi.shape[0], 4)))
    chi_m = ChiMatrix(chi, m)
    chi_err = factor_ideal(chi_m, U)
    probs = error_probabilities(chi_err)
    flagged = max(leak.values()) > leakage_threshold
    try:
        fid = gate_fidelity(chi_err)
    except TomographyError:
        fid = float("nan")
        flagged = True
    return TomographyReport(chi_m, chi_err, leak, fid, probs, flagged, info or {})
