"""Pauli-frame simulation of fault circuits.

Two executors share the same propagation rules:

* ``sample`` runs many shots at once on (shots, qubits) bit arrays, drawing
  faults and Toffoli twirls from chunked RNG streams.
* ``run_branches`` executes a single shot with prescribed faults and follows
  every twirl outcome, returning the exact branch distribution.  It is the
  engine behind the fault enumerations.

Propagation rules: CNOT copies X from control to target and Z from target to
control.  A Toffoli commutes with Z on its controls; Z on the target becomes
one of I, Z_c1, Z_c2, Z_c1 Z_c2 with probability 1/4 each (twirled
controlled-Z).  X on a control becomes one of I, Z_other, X_t, Z_other X_t with
probability 1/4 each (twirled controlled-NOT from the other control).
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .circuit import FaultCircuit
from .decoder import CachedDecoder, edge_weights

CHUNK = 1 << 15


@dataclass
class PauliFrame:
    """Z and X flip bits for every qubit of a circuit."""

    z_flips: np.ndarray
    x_flips: np.ndarray

    def __post_init__(self):
        self.z_flips = np.asarray(self.z_flips, dtype=np.uint8).copy()
        self.x_flips = np.asarray(self.x_flips, dtype=np.uint8).copy()
        if self.z_flips.shape != self.x_flips.shape:
            raise ValueError("z and x flip vectors must have equal length")

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliFrame":
        return cls(np.zeros(n_qubits, np.uint8), np.zeros(n_qubits, np.uint8))

    def __len__(self):
        return len(self.z_flips)


@dataclass
class ShotResult:
    """Outcome of one shot (or one enumerated branch)."""

    z_logical: tuple
    x_logical: tuple
    xl_flips: tuple
    x_seen: bool
    records: int = 0
    frame: tuple = (0, 0)

    @property
    def failed(self) -> bool:
        return any(self.z_logical) or any(self.x_logical) or any(self.xl_flips)


def _decoders(circ: FaultCircuit, method: str) -> dict:
    weights = None
    if method == "weighted":
        if circ.params is None:
            raise ValueError("the weighted decoder needs a circuit built from RepCodeParams")
        weights = edge_weights(*circ.params.edge_probabilities())
    return {len(b): CachedDecoder(len(b), method, weights) for b in circ.blocks}


def _stage_history(circ, sid, bit):
    stage = circ.stages[sid]
    return np.array([[bit(s) for s in row] for row in stage.slots], dtype=np.uint8).reshape(
        len(stage.slots), len(stage.data) - 1)


# ----------------------------------------------------------------- single shot


class _State:
    __slots__ = ("z", "x", "rec", "x_seen", "zl", "xl", "xm", "applied", "raw")

    def __init__(self, frame: PauliFrame | None = None):
        self.z = self.x = 0
        if frame is not None:
            self.z = int(sum(1 << i for i, b in enumerate(frame.z_flips) if b))
            self.x = int(sum(1 << i for i, b in enumerate(frame.x_flips) if b))
        self.rec = 0
        self.x_seen = self.x != 0
        self.zl = []
        self.xl = []
        self.xm = []
        self.applied = {}
        self.raw = {}

    def copy(self):
        s = _State.__new__(_State)
        s.z, s.x, s.rec, s.x_seen = self.z, self.x, self.rec, self.x_seen
        s.zl, s.xl, s.xm = list(self.zl), list(self.xl), list(self.xm)
        s.applied = dict(self.applied)
        s.raw = {k: list(v) for k, v in self.raw.items()}
        return s


def _bit(v, i):
    return (v >> i) & 1


def _mask(qubits):
    m = 0
    for q in qubits:
        m |= 1 << q
    return m


def _syndrome(c):
    c = np.asarray(c, dtype=np.uint8)
    return c[..., :-1] ^ c[..., 1:]


class _Executor:
    def __init__(self, circ: FaultCircuit, decoder: str = "mwpm"):
        self.circ = circ
        self.dec = _decoders(circ, decoder)

    def run(self, state: _State, faults, chooser, pos: int = 0, prob: float = 1.0):
        """Execute from ``pos``; ``chooser(k)`` returns k twirl outcomes, or None to branch."""
        circ = self.circ
        ops = circ.ops
        while pos < len(ops):
            op = ops[pos]
            kind = op[0]
            if kind == "fault":
                k = faults(op[1])
                if k is not None:
                    _, zq, xq, _ = circ.locations[op[1]].outcomes[k]
                    state.z ^= _mask(zq)
                    state.x ^= _mask(xq)
                    if xq:
                        state.x_seen = True
            elif kind == "prep":
                m = _mask(op[1])
                state.z &= ~m
                state.x &= ~m
            elif kind == "cnot":
                _, c, t = op
                if _bit(state.x, c):
                    state.x ^= 1 << t
                if _bit(state.z, t):
                    state.z ^= 1 << c
            elif kind == "toffoli":
                _, c1, c2, t = op
                events = []
                if _bit(state.z, t):
                    events.append(("zt", c1, c2, t))
                if _bit(state.x, c1):
                    events.append(("xc", c2, c2, t))
                if _bit(state.x, c2):
                    events.append(("xc", c1, c1, t))
                if events:
                    return self._twirl(state, faults, chooser, pos, prob, events)
            elif kind == "measure":
                _, q, slot, loc = op
                flip = 1 if (loc is not None and faults(loc) is not None) else 0
                if _bit(state.z, q) ^ flip:
                    state.rec |= 1 << slot
            elif kind == "decode":
                self._decode(state, op[1])
            elif kind in ("output", "majority"):
                self._readout(state, op)
            pos += 1
        res = ShotResult(tuple(state.zl), tuple(state.xl), tuple(state.xm), state.x_seen,
                         state.rec, (state.z, state.x))
        return [(prob, res)]

    def _twirl(self, state, faults, chooser, pos, prob, events):
        fixed = chooser(len(events))
        if fixed is not None:
            outcomes, weight = [fixed], 1.0
        else:
            outcomes = list(itertools.product(range(4), repeat=len(events)))
            weight = 1.0 / len(outcomes)
        results = []
        for choice in outcomes:
            s = state.copy() if len(outcomes) > 1 else state
            for (kind, a, b, t), r in zip(events, choice):
                if kind == "zt":
                    if r & 1:
                        s.z ^= 1 << a
                    if r & 2:
                        s.z ^= 1 << b
                else:
                    if r & 1:
                        s.z ^= 1 << a
                    if r & 2:
                        s.x ^= 1 << t
                        s.x_seen = True
            results.extend(self.run(s, faults, chooser, pos + 1, prob * weight))
        return results

    def _append_stage(self, state, sid):
        stage = self.circ.stages[sid]
        n = len(stage.data)
        applied = state.applied.get(stage.block, np.zeros(n, np.uint8))
        meas = _stage_history(self.circ, sid, lambda s: _bit(state.rec, s))
        state.raw.setdefault(stage.block, []).append(meas ^ _syndrome(applied)[None, :])
        return stage, applied

    def _decode(self, state, sid):
        stage, applied = self._append_stage(state, sid)
        hist = np.vstack(state.raw[stage.block])
        corr = self.dec[len(stage.data)](hist, open_end=True)
        for q, c in zip(stage.data, corr ^ applied):
            if c:
                state.z ^= 1 << q
        state.applied[stage.block] = corr

    def _readout(self, state, op):
        kind, block, sid, slots = op[:4]
        data = self.circ.blocks[block]
        n = len(data)
        if sid is not None and self.circ.stages[sid].final:
            self._append_stage(state, sid)
        applied = state.applied.get(block, np.zeros(n, np.uint8))
        m = np.array([_bit(state.rec, s) for s in slots], dtype=np.uint8) ^ applied
        hist = np.vstack(state.raw.get(block, []) + [_syndrome(m)[None, :]])
        m ^= self.dec[n](hist)
        if m.min() != m.max():
            raise RuntimeError("decoded readout is not a codeword")
        if kind == "majority":
            state.xm.append(int(m[0]))
        else:
            state.zl.append(int(m[0]))
            state.xl.append(bin(state.x & _mask(data)).count("1") & 1)


def run_branches(circ: FaultCircuit, faults: dict | None = None, decoder: str = "mwpm",
                 frame: PauliFrame | None = None) -> list:
    """All twirl branches of one shot with the given {location: outcome index} faults."""
    faults = faults or {}
    ex = _Executor(circ, decoder)
    return ex.run(_State(frame), faults.get, lambda k: None)


def propagate(frame: PauliFrame, circ: FaultCircuit, rng: np.random.Generator,
              decoder: str = "mwpm"):
    """Sample one shot starting from ``frame``.

    Returns the final frame, the syndrome history of every stage (list of
    (rounds, n-1) arrays) and the ShotResult.
    """
    if len(frame) != circ.n_qubits:
        raise ValueError(f"frame has {len(frame)} qubits, circuit has {circ.n_qubits}")
    draws = {}
    for i, loc in enumerate(circ.locations):
        u = rng.random()
        acc = 0.0
        for k, o in enumerate(loc.outcomes):
            acc += o[0]
            if u < acc:
                draws[i] = k
                break
    ex = _Executor(circ, decoder)
    chooser = lambda k: tuple(int(v) for v in rng.integers(0, 4, size=k))
    (_, res), = ex.run(_State(frame), draws.get, chooser)
    z, x = res.frame
    nq = circ.n_qubits
    out = PauliFrame([(z >> i) & 1 for i in range(nq)], [(x >> i) & 1 for i in range(nq)])
    hist = [_stage_history(circ, sid, lambda s: _bit(res.records, s))
            for sid in range(len(circ.stages))]
    return out, hist, res


# ------------------------------------------------------------------- vectorised


@dataclass
class SampleCounts:
    shots: int = 0
    z_fail: int = 0
    x_fail: int = 0
    any_fail: int = 0
    x_seen: int = 0
    per_output_z: list = field(default_factory=list)
    per_output_x: list = field(default_factory=list)
    xl_flips: list = field(default_factory=list)

    def add(self, other: "SampleCounts"):
        if not self.per_output_z:
            self.per_output_z = [0] * len(other.per_output_z)
            self.per_output_x = [0] * len(other.per_output_x)
            self.xl_flips = [0] * len(other.xl_flips)
        self.shots += other.shots
        self.z_fail += other.z_fail
        self.x_fail += other.x_fail
        self.any_fail += other.any_fail
        self.x_seen += other.x_seen
        self.per_output_z = [a + b for a, b in zip(self.per_output_z, other.per_output_z)]
        self.per_output_x = [a + b for a, b in zip(self.per_output_x, other.per_output_x)]
        self.xl_flips = [a + b for a, b in zip(self.xl_flips, other.xl_flips)]


def _sample_chunk(circ: FaultCircuit, shots: int, rng: np.random.Generator, decoders: dict,
                  z_from_xl: bool) -> SampleCounts:
    nq = circ.n_qubits
    z = np.zeros((shots, nq), dtype=np.uint8)
    x = np.zeros((shots, nq), dtype=np.uint8)
    rec = np.zeros((shots, max(circ.n_slots, 1)), dtype=np.uint8)
    x_seen = np.zeros(shots, dtype=bool)
    zl, xl, xm = [], [], []
    raw: dict = {}
    applied_c: dict = {}

    def _append_raw(stage, sid):
        applied = applied_c.get(stage.block, np.zeros((shots, len(stage.data)), np.uint8))
        meas = rec[:, np.array(circ.stages[sid].slots)]
        raw.setdefault(stage.block, []).append(meas ^ _syndrome(applied)[:, None, :])
        return applied

    for op in circ.ops:
        kind = op[0]
        if kind == "fault":
            loc = circ.locations[op[1]]
            u = rng.random(shots)
            lo = 0.0
            for p, zq, xq, _ in loc.outcomes:
                hit = ((u >= lo) & (u < lo + p)).astype(np.uint8)
                lo += p
                for q in zq:
                    z[:, q] ^= hit
                for q in xq:
                    x[:, q] ^= hit
                if xq:
                    x_seen |= hit.astype(bool)
        elif kind == "prep":
            idx = list(op[1])
            z[:, idx] = 0
            x[:, idx] = 0
        elif kind == "cnot":
            _, c, t = op
            x[:, t] ^= x[:, c]
            z[:, c] ^= z[:, t]
        elif kind == "toffoli":
            _, c1, c2, t = op
            zt = z[:, t]
            xc1 = x[:, c1].copy()
            xc2 = x[:, c2].copy()
            if zt.any():
                r = rng.integers(0, 4, size=shots, dtype=np.uint8)
                z[:, c1] ^= zt & r
                z[:, c2] ^= zt & (r >> 1)
            for xc, other in ((xc1, c2), (xc2, c1)):
                if xc.any():
                    r = rng.integers(0, 4, size=shots, dtype=np.uint8)
                    z[:, other] ^= xc & r
                    x[:, t] ^= xc & (r >> 1)
                    x_seen |= (xc & (r >> 1)).astype(bool)
        elif kind == "measure":
            _, q, slot, loc = op
            rec[:, slot] = z[:, q]
            if loc is not None:
                p = circ.locations[loc].outcomes[0][0]
                rec[:, slot] ^= (rng.random(shots) < p).astype(np.uint8)
        elif kind == "decode":
            stage = circ.stages[op[1]]
            applied = _append_raw(stage, op[1])
            hist = np.concatenate(raw[stage.block], axis=1)
            corr = decoders[len(stage.data)].batch(hist, open_end=True)
            z[:, list(stage.data)] ^= corr ^ applied
            applied_c[stage.block] = corr
        elif kind in ("output", "majority"):
            block, sid, slots = op[1:4]
            data = list(circ.blocks[block])
            n = len(data)
            if sid is not None and circ.stages[sid].final:
                _append_raw(circ.stages[sid], sid)
            applied = applied_c.get(block, np.zeros((shots, n), np.uint8))
            m = rec[:, list(slots)] ^ applied
            hist = np.concatenate(raw.get(block, []) + [_syndrome(m)[:, None, :]], axis=1)
            m = m ^ decoders[n].batch(hist)
            if np.any(m.min(axis=1) != m.max(axis=1)):
                raise RuntimeError("decoded readout is not a codeword")
            if kind == "majority":
                xm.append(m[:, 0].astype(bool))
            else:
                zl.append(m[:, 0].astype(bool))
                xl.append((x[:, data].sum(axis=1) & 1).astype(bool))
    x_seen |= x.any(axis=1)
    counts = SampleCounts(shots=shots)
    zany = np.zeros(shots, bool)
    xany = np.zeros(shots, bool)
    for a in zl:
        zany |= a
    for a in xl:
        xany |= a
    # an X_L readout error acts as a logical Z before the measurement
    for a in xm:
        if z_from_xl:
            zany |= a
        else:
            xany |= a
    counts.z_fail = int(zany.sum())
    counts.x_fail = int(xany.sum())
    counts.any_fail = int((zany | xany).sum())
    counts.x_seen = int(x_seen.sum())
    counts.per_output_z = [int(a.sum()) for a in zl]
    counts.per_output_x = [int(a.sum()) for a in xl]
    counts.xl_flips = [int(a.sum()) for a in xm]
    return counts


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Independent stream for one chunk of shots, a pure function of (seed, chunk)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(chunk)]))


def sample(circ: FaultCircuit, shots: int, seed: int, decoder: str = "mwpm",
           threads: int = 1, chunk: int = CHUNK) -> SampleCounts:
    """Monte-Carlo counts over ``shots`` shots; identical for any thread count.

    A flipped majority vote counts as a logical Z failure unless the circuit
    teleports through it (Hadamard gadget), where it becomes an X_L on the
    output.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    z_from_xl = circ.name != "Hadamard_gadget"
    sizes = [min(chunk, shots - k) for k in range(0, shots, chunk)]

    def job(i):
        return _sample_chunk(circ, sizes[i], chunk_rng(seed, i), _decoders(circ, decoder),
                             z_from_xl)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]
    total = SampleCounts()
    for p in parts:
        total.add(p)
    return total
