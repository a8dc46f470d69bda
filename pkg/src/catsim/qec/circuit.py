"""Logical-level fault circuits for the dual-basis repetition code.

A circuit is a flat list of operations on qubit indices, together with a table
of fault locations.  Every location is an independent categorical event whose
non-trivial outcomes are Pauli patterns (or a measurement flip).  QEC stages
record which measurement slots hold their syndrome rounds so that decoding can
happen inside the circuit, before the next non-Clifford piece.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

CNOT_KEYS = ("Z1", "Z2", "Z1Z2")
TOFFOLI_KEYS = ("Z1", "Z2", "Z3", "Z1Z2", "Z1Z3", "Z2Z3", "Z1Z2Z3")
GADGETS = ("memory", "CNOT_transversal", "Toffoli_pieceable", "Hadamard_gadget",
           "prep_plus_L", "measure_XL")


@dataclass(frozen=True)
class RepCodeParams:
    """Code length, syndrome rounds and per-location error probabilities.

    ``cnot`` holds the post-gate probabilities of Z on the control (Z1), the
    target (Z2) and both (Z1Z2).  ``toffoli`` uses (control 1, control 2,
    target) numbering.  ``p_data`` is an iid Z on every data qubit at the start
    of each QEC stage, used for code-capacity checks.
    """

    n: int
    r: int = 1
    p_prep: float = 0.0
    p_idle: float = 0.0
    p_meas: float = 0.0
    p_x: float = 0.0
    p_data: float = 0.0
    cnot: dict = field(default_factory=lambda: dict.fromkeys(CNOT_KEYS, 0.0))
    toffoli: dict = field(default_factory=lambda: dict.fromkeys(TOFFOLI_KEYS, 0.0))

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3 or self.n % 2 == 0:
            raise ValueError(f"code length must be an odd integer >= 3, got {self.n}")
        if int(self.r) != self.r or self.r < 1:
            raise ValueError("r must be a positive integer")
        cnot = {k: float(self.cnot.get(k, 0.0)) for k in CNOT_KEYS}
        toff = {k: float(self.toffoli.get(k, 0.0)) for k in TOFFOLI_KEYS}
        unknown = (set(self.cnot) - set(CNOT_KEYS)) | (set(self.toffoli) - set(TOFFOLI_KEYS))
        if unknown:
            raise ValueError(f"unknown error keys {sorted(unknown)}")
        object.__setattr__(self, "cnot", cnot)
        object.__setattr__(self, "toffoli", toff)
        probs = [self.p_prep, self.p_idle, self.p_meas, self.p_x, self.p_data]
        probs += list(cnot.values()) + list(toff.values())
        if any(not (0 <= p < 1) for p in probs):
            raise ValueError("all probabilities must lie in [0, 1)")
        if sum(cnot.values()) >= 1 or sum(toff.values()) >= 1:
            raise ValueError("gate error probabilities must sum below 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def edge_probabilities(self) -> tuple:
        """Per-round (time, space, diagonal) edge probabilities of the matching graph.

        Time edges collect everything that flips one ancilla record, space edges
        the data faults seen by both neighbouring checks in the same round, and
        diagonal edges the data faults between the two CNOT layers.
        """
        c = self.cnot
        p_time = self.p_prep + self.p_meas + 2 * (c["Z1"] + c["Z1Z2"])
        p_space = self.p_idle + c["Z2"] + c["Z1Z2"]
        p_diag = c["Z2"] + c["Z1Z2"]
        clamp = lambda p: min(max(p, 1e-9), 0.49)
        return clamp(p_time), clamp(p_space), clamp(p_diag)

    @classmethod
    def from_dict(cls, data: dict) -> "RepCodeParams":
        return cls(**data)

    @classmethod
    def from_cat_params(cls, n: int, r: int, params, T: float | None = None,
                        p_meas: float = 0.015) -> "RepCodeParams":
        """Rates from the analytic gate budgets at gate time T (default T*).

        Preparation and idle errors use one gate time of photon loss, and the
        bit-flip rate uses the rough estimate nbar k1 T exp(-2 nbar).
        """
        from ..error_models import cnot_error_budget, optimal_gate_time, toffoli_error_budget

        T = optimal_gate_time(params) if T is None else T
        cb = cnot_error_budget(params, T)
        tb = toffoli_error_budget(params, T)
        loss = params.nbar * params.kappa1 * T
        return cls(
            n=n, r=r, p_prep=loss, p_idle=loss, p_meas=p_meas,
            p_x=loss * math.exp(-2 * params.nbar),
            cnot={"Z1": cb.p_Z1, "Z2": cb.p_Z2, "Z1Z2": cb.p_Z1Z2},
            toffoli={k: getattr(tb, "p_" + k) for k in TOFFOLI_KEYS},
        )


@dataclass(frozen=True)
class Location:
    """Independent fault event: outcomes are (probability, z-qubits, x-qubits, meas-flip)."""

    kind: str
    qubits: tuple
    outcomes: tuple

    @property
    def probability(self) -> float:
        return float(sum(o[0] for o in self.outcomes))


@dataclass
class QECStage:
    """Syndrome rounds of one block: ``slots[t][j]`` is the measurement slot of stabilizer j in round t."""

    block: int
    data: tuple
    slots: list
    final: bool = False


@dataclass
class FaultCircuit:
    """Flat operation list with fault locations, QEC stages and logical outputs."""

    n_qubits: int = 0
    ops: list = field(default_factory=list)
    locations: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    n_slots: int = 0
    outputs: list = field(default_factory=list)
    xl_measurements: list = field(default_factory=list)
    name: str = ""
    params: RepCodeParams | None = None

    # ----------------------------------------------------------- building

    def new_qubits(self, k: int) -> list:
        out = list(range(self.n_qubits, self.n_qubits + k))
        self.n_qubits += k
        return out

    def new_block(self, n: int) -> int:
        self.blocks.append(tuple(self.new_qubits(n)))
        return len(self.blocks) - 1

    def _location(self, kind, qubits, outcomes):
        outcomes = tuple(o for o in outcomes if o[0] > 0)
        if not outcomes:
            return None
        self.locations.append(Location(kind, tuple(qubits), outcomes))
        self.ops.append(("fault", len(self.locations) - 1))
        return len(self.locations) - 1

    def z_fault(self, kind, q, p):
        self._location(kind, (q,), [(p, (q,), (), False)])

    def x_fault(self, kind, qubits, p):
        """Independent X with probability p on each qubit."""
        for q in qubits:
            self._location(kind + "_x", (q,), [(p, (), (q,), False)])

    def prep(self, qubits, params: RepCodeParams):
        self.ops.append(("prep", tuple(qubits)))
        for q in qubits:
            self.z_fault("prep", q, params.p_prep)
        self.x_fault("prep", qubits, params.p_x)

    def idle(self, qubits, params: RepCodeParams, p=None):
        p = params.p_idle if p is None else p
        for q in qubits:
            self.z_fault("idle", q, p)
        self.x_fault("idle", qubits, params.p_x)

    def cnot(self, c, t, params: RepCodeParams):
        if c == t:
            raise ValueError("CNOT needs distinct qubits")
        self.ops.append(("cnot", c, t))
        e = params.cnot
        self._location("cnot", (c, t), [
            (e["Z1"], (c,), (), False),
            (e["Z2"], (t,), (), False),
            (e["Z1Z2"], (c, t), (), False),
        ])
        self.x_fault("cnot", (c, t), params.p_x)

    def toffoli(self, c1, c2, t, params: RepCodeParams):
        if len({c1, c2, t}) != 3:
            raise ValueError("Toffoli needs distinct qubits")
        self.ops.append(("toffoli", c1, c2, t))
        e = params.toffoli
        names = {"1": c1, "2": c2, "3": t}
        outs = []
        for key in TOFFOLI_KEYS:
            qs = tuple(names[ch] for ch in key if ch.isdigit())
            outs.append((e[key], qs, (), False))
        self._location("toffoli", (c1, c2, t), outs)
        self.x_fault("toffoli", (c1, c2, t), params.p_x)

    def measure(self, q, params: RepCodeParams, p_meas=None) -> int:
        """X-basis measurement of q into a new record slot."""
        slot = self.n_slots
        self.n_slots += 1
        p = params.p_meas if p_meas is None else p_meas
        loc = None
        if p > 0:
            self.locations.append(Location("meas", (q,), ((p, (), (), True),)))
            loc = len(self.locations) - 1
        self.ops.append(("measure", q, slot, loc))
        return slot

    def qec_stage(self, block: int, params: RepCodeParams, rounds: int | None = None,
                  final: bool = False, decode: bool = True) -> int:
        """``rounds`` syndrome rounds on a block; ``final`` appends a perfect readout round."""
        data = self.blocks[block]
        n = len(data)
        rounds = params.r if rounds is None else rounds
        self.params = params
        if params.p_data > 0:
            for q in data:
                self.z_fault("data", q, params.p_data)
        anc = self.new_qubits(n - 1)
        slots = []
        for _ in range(rounds):
            self.idle(data, params)
            self.prep(anc, params)
            for j in range(n - 1):
                self.cnot(anc[j], data[j], params)
            for j in range(n - 1):
                self.cnot(anc[j], data[j + 1], params)
            slots.append([self.measure(anc[j], params) for j in range(n - 1)])
        self.stages.append(QECStage(block, tuple(data), slots, final))
        sid = len(self.stages) - 1
        if decode and not final:
            self.ops.append(("decode", sid))
        return sid

    def final_readout(self, block: int, params: RepCodeParams, stage: int | None = None,
                      p_meas: float = 0.0):
        """Destructive X readout of a block, decoded together with ``stage``.

        Readout bits give a perfect last syndrome round for the effective
        errors, so the corrected readout is a codeword; all ones is a logical Z.
        """
        data = self.blocks[block]
        slots = [self.measure(q, params, p_meas) for q in data]
        self.ops.append(("output", block, stage, tuple(slots)))
        self.outputs.append(block)

    def measure_xl(self, block: int, params: RepCodeParams, stage: int | None = None,
                   p_meas: float | None = None) -> int:
        """M_X on every qubit of a block and a majority vote (after the stage correction)."""
        data = self.blocks[block]
        slots = tuple(self.measure(q, params, p_meas) for q in data)
        self.xl_measurements.append(slots)
        self.ops.append(("majority", block, stage, slots, len(self.xl_measurements) - 1))
        return len(self.xl_measurements) - 1

    # ------------------------------------------------------------ summary

    def counts(self) -> dict:
        out = {}
        for op in self.ops:
            out[op[0]] = out.get(op[0], 0) + 1
        return out

    def describe(self) -> str:
        return json.dumps({"name": self.name, "n_qubits": self.n_qubits,
                           "blocks": [list(b) for b in self.blocks], "counts": self.counts(),
                           "locations": len(self.locations)}, sort_keys=True)


def build_qec_round(params: RepCodeParams) -> FaultCircuit:
    """r rounds of syndrome extraction on one block, without decoding."""
    circ = FaultCircuit(name="qec_round")
    b = circ.new_block(params.n)
    circ.qec_stage(b, params, decode=False)
    return circ


def memory_circuit(params: RepCodeParams, stages: int = 1) -> FaultCircuit:
    """Idle logical qubit: ``stages`` QEC stages of r rounds, then a perfect readout round."""
    circ = FaultCircuit(name="memory")
    b = circ.new_block(params.n)
    sid = None
    for k in range(stages):
        sid = circ.qec_stage(b, params, final=(k == stages - 1))
    circ.final_readout(b, params, sid)
    return circ


def cnot_gadget(params: RepCodeParams) -> FaultCircuit:
    """Transversal logical CNOT (block 0 controls block 1) followed by QEC on both blocks."""
    circ = FaultCircuit(name="CNOT_transversal")
    a = circ.new_block(params.n)
    b = circ.new_block(params.n)
    for qa, qb in zip(circ.blocks[a], circ.blocks[b]):
        circ.cnot(qa, qb, params)
    sa = circ.qec_stage(a, params, final=True)
    sb = circ.qec_stage(b, params, final=True)
    circ.final_readout(a, params, sa)
    circ.final_readout(b, params, sb)
    return circ


def _pieceable_toffoli(circ: FaultCircuit, b1: int, b2: int, b3: int, params: RepCodeParams,
                       intermediate_blocks=(0,)):
    """n pieces of n Toffolis; QEC on the listed blocks (by role) between pieces."""
    q1, q2, q3 = circ.blocks[b1], circ.blocks[b2], circ.blocks[b3]
    n = len(q1)
    roles = (b1, b2, b3)
    for i in range(n):
        for k in range(n):
            circ.toffoli(q1[i], q2[k], q3[k], params)
        if i < n - 1:
            for role in intermediate_blocks:
                circ.qec_stage(roles[role], params)


def toffoli_gadget(params: RepCodeParams, intermediate_blocks=(0,)) -> FaultCircuit:
    """Pieceable logical Toffoli (controls blocks 0 and 1, target block 2) with trailing QEC."""
    circ = FaultCircuit(name="Toffoli_pieceable")
    b = [circ.new_block(params.n) for _ in range(3)]
    _pieceable_toffoli(circ, b[0], b[1], b[2], params, intermediate_blocks)
    stages = [circ.qec_stage(x, params, final=True) for x in b]
    for x, s in zip(b, stages):
        circ.final_readout(x, params, s)
    return circ


def hadamard_gadget(params: RepCodeParams, intermediate_blocks=(0,)) -> FaultCircuit:
    """Logical Hadamard by phase kickback and one-bit teleportation.

    Block A holds the input, B is prepared in |->_L and C in |+>_L.  The
    Toffoli with controls A, C and target B acts as CZ(A, C); measuring X_L on
    A with outcome m leaves X^m H |psi> on C, and the X^m is a frame update.
    """
    circ = FaultCircuit(name="Hadamard_gadget")
    A = circ.new_block(params.n)
    B = circ.new_block(params.n)
    C = circ.new_block(params.n)
    circ.prep(circ.blocks[B], params)
    circ.prep(circ.blocks[C], params)
    for x in (B, C):
        circ.qec_stage(x, params)
    _pieceable_toffoli(circ, A, C, B, params, intermediate_blocks)
    sa = circ.qec_stage(A, params)
    circ.measure_xl(A, params, sa)
    sc = circ.qec_stage(C, params, final=True)
    circ.final_readout(C, params, sc)
    return circ


def prep_plus_gadget(params: RepCodeParams) -> FaultCircuit:
    """Transversal |+>_L preparation followed by QEC."""
    circ = FaultCircuit(name="prep_plus_L")
    b = circ.new_block(params.n)
    circ.prep(circ.blocks[b], params)
    s = circ.qec_stage(b, params, final=True)
    circ.final_readout(b, params, s)
    return circ


def measure_xl_gadget(params: RepCodeParams) -> FaultCircuit:
    """M_X on every qubit and a majority vote; the vote flips on a logical error."""
    circ = FaultCircuit(name="measure_XL")
    b = circ.new_block(params.n)
    if params.p_data > 0:
        for q in circ.blocks[b]:
            circ.z_fault("data", q, params.p_data)
    circ.idle(circ.blocks[b], params)
    circ.measure_xl(b, params, None)
    return circ


def logical_gadget(kind: str, params: RepCodeParams, **kwargs) -> FaultCircuit:
    builders = {
        "memory": memory_circuit,
        "CNOT_transversal": cnot_gadget,
        "Toffoli_pieceable": toffoli_gadget,
        "Hadamard_gadget": hadamard_gadget,
        "prep_plus_L": prep_plus_gadget,
        "measure_XL": measure_xl_gadget,
    }
    if kind not in builders:
        raise ValueError(f"unknown gadget {kind!r}; choose from {sorted(builders)}")
    circ = builders[kind](params, **kwargs)
    circ.params = params
    return circ
