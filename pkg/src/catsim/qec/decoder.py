"""Decoders for repetition-code syndrome histories.

Stabilizer j of an n-qubit block compares data qubits j and j+1.  A history is
an (R, n-1) array of syndrome bits; detection events are changes between
consecutive rounds with an all-zero reference before the first round.

The matching decoder pairs detection events with the metric of the space-time
graph generated by data faults (horizontal), measurement faults (vertical) and
faults between the two CNOT layers, which flip stabilizer j-1 in one round and
stabilizer j in the next (diagonal).
"""

from __future__ import annotations

from functools import lru_cache

import networkx as nx
import numpy as np

EXACT_LIMIT = 14


def detection_events(history) -> list:
    """(round, stabilizer) coordinates of syndrome changes."""
    h = np.asarray(history, dtype=np.uint8)
    if h.ndim != 2:
        raise ValueError("history must be a 2-D array")
    prev = np.vstack([np.zeros((1, h.shape[1]), dtype=np.uint8), h[:-1]])
    t, j = np.nonzero(h ^ prev)
    return list(zip(t.tolist(), j.tolist()))


UNIFORM = (1.0, 1.0, 1.0)


def edge_weights(p_time: float, p_space: float, p_diag: float | None = None) -> tuple:
    """Log-likelihood weights ln((1-p)/p) of time, space and diagonal edges."""
    p_diag = p_space if p_diag is None else p_diag
    out = []
    for p in (p_time, p_space, p_diag):
        if not 0 < p < 0.5:
            raise ValueError("edge probabilities must lie in (0, 0.5)")
        out.append(float(np.log((1 - p) / p)))
    return tuple(out)


def pair_distance(a, b, weights=UNIFORM) -> float:
    """Shortest path between two detection events.

    ``weights`` are the (time, space, diagonal) edge costs; the default unit
    weights give max(dt, dj) along the diagonal direction and dt + |dj| against it.
    """
    (t1, j1), (t2, j2) = sorted([a, b])
    dt, dj = t2 - t1, j2 - j1
    wt, ws, wd = weights
    if dj >= 0:
        k = min(dt, dj) if wd < wt + ws else 0
        return k * wd + (dt - k) * wt + (dj - k) * ws
    return dt * wt - dj * ws


def boundary_distance(j: int, n: int) -> int:
    return min(j + 1, n - 1 - j)


def _boundary_flip(j: int, n: int) -> np.ndarray:
    c = np.zeros(n, dtype=np.uint8)
    if j + 1 <= n - 1 - j:
        c[: j + 1] = 1
    else:
        c[j + 1:] = 1
    return c


def _pair_flip(j1: int, j2: int, n: int) -> np.ndarray:
    c = np.zeros(n, dtype=np.uint8)
    lo, hi = sorted((j1, j2))
    c[lo + 1: hi + 1] = 1
    return c


def _boundary_costs(events, n, rounds, weights=UNIFORM):
    """(cost, flips data) per event; an open end defers last-round events to the future."""
    wt, ws, _ = weights
    out = []
    for t, j in events:
        space = boundary_distance(j, n) * ws
        if rounds is not None and (rounds - t) * wt <= space:
            out.append(((rounds - t) * wt, False))
        else:
            out.append((space, True))
    return out


def _exact_matching(events, n, bd, flips=None, weights=UNIFORM):
    """Minimum-weight matching with boundary by dynamic programming over subsets.

    Ties are broken against boundary matches that flip data qubits.
    """
    k = len(events)
    dist = [[pair_distance(events[a], events[b], weights) for b in range(k)] for a in range(k)]
    pen = [int(f) for f in flips] if flips is not None else [0] * k
    tol = 1e-9

    @lru_cache(maxsize=None)
    def best(mask):
        if mask == 0:
            return (0.0, 0), ()
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        (cost, tie), pairs = best(rest)
        choice = ((cost + bd[i], tie + pen[i]), ((i, -1),) + pairs)
        m = rest
        while m:
            jb = m & -m
            j = jb.bit_length() - 1
            (c2, t2), p2 = best(rest & ~jb)
            c2 += dist[i][j]
            if c2 < choice[0][0] - tol or (abs(c2 - choice[0][0]) <= tol and t2 < choice[0][1]):
                choice = ((c2, t2), ((i, j),) + p2)
            m &= m - 1
        return choice

    return best((1 << k) - 1)[1]


def _graph_matching(events, n, bd, flips=None, weights=UNIFORM):
    """Matching through networkx with one virtual boundary node per event."""
    k = len(events)
    eps = 1e-6 / (k + 1)
    pen = [int(f) for f in flips] if flips is not None else [0] * k
    g = nx.Graph()
    for a in range(k):
        g.add_edge(("e", a), ("b", a), weight=-(bd[a] + eps * pen[a]))
        for b in range(a + 1, k):
            g.add_edge(("e", a), ("e", b), weight=-pair_distance(events[a], events[b], weights))
            g.add_edge(("b", a), ("b", b), weight=0)
    matching = nx.max_weight_matching(g, maxcardinality=True)
    pairs = []
    for u, v in matching:
        if u[0] == "e" and v[0] == "e":
            pairs.append((u[1], v[1]))
        elif u[0] == "e" or v[0] == "e":
            e = u if u[0] == "e" else v
            pairs.append((e[1], -1))
    return tuple(pairs)


def matching_weight(events, pairs, n, open_end: bool = False, rounds: int | None = None,
                    weights=UNIFORM) -> float:
    bd = _boundary_costs(events, n, rounds if open_end else None, weights)
    total = 0.0
    for a, b in pairs:
        total += bd[a][0] if b < 0 else pair_distance(events[a], events[b], weights)
    return total


def match_events(events, n: int, rounds: int | None = None, weights=UNIFORM):
    """Minimum-weight pairs (i, j) of event indices; j = -1 marks a boundary."""
    bd = _boundary_costs(events, n, rounds, weights)
    costs = [c for c, _ in bd]
    flips = [f for _, f in bd]
    if len(events) <= EXACT_LIMIT:
        return _exact_matching(events, n, costs, flips, weights), bd
    return _graph_matching(events, n, costs, flips, weights), bd


def mwpm_decode(history, n: int, open_end: bool = False, weights=UNIFORM) -> np.ndarray:
    """Z correction (length n bit array) from a syndrome history.

    With ``open_end`` the last round is not trusted: events close to the end
    may match a future time boundary, deferring their correction to a later
    decode of the extended history.
    """
    h = np.asarray(history, dtype=np.uint8)
    if h.ndim != 2 or h.shape[1] != n - 1:
        raise ValueError(f"history must have {n - 1} stabilizer columns")
    events = detection_events(h)
    if not events:
        return np.zeros(n, dtype=np.uint8)
    pairs, bd = match_events(events, n, h.shape[0] if open_end else None, weights)
    corr = np.zeros(n, dtype=np.uint8)
    for a, b in pairs:
        if b < 0:
            if bd[a][1]:
                corr ^= _boundary_flip(events[a][1], n)
        else:
            corr ^= _pair_flip(events[a][1], events[b][1], n)
    return corr


def syndrome_correction(syndrome, n: int) -> np.ndarray:
    """Minimum-weight Z pattern with the given single-round syndrome."""
    s = np.asarray(syndrome, dtype=np.uint8)
    c = np.concatenate([[0], np.bitwise_xor.accumulate(s)]).astype(np.uint8)
    return c if c.sum() <= n - c.sum() else c ^ 1


def majority_decode(history, n: int, open_end: bool = False, weights=None) -> np.ndarray:
    """Baseline: per-stabilizer majority over rounds, then a single-round correction.

    A closed history ends with a trusted round, which then decides alone.
    """
    h = np.asarray(history, dtype=np.uint8)
    if not open_end:
        return syndrome_correction(h[-1], n)
    votes = (2 * h.sum(axis=0) > h.shape[0]).astype(np.uint8)
    return syndrome_correction(votes, n)


DECODERS = {"mwpm": mwpm_decode, "weighted": mwpm_decode, "majority": majority_decode}


class CachedDecoder:
    """Decodes batches of histories, memoising by the packed history bits."""

    def __init__(self, n: int, method: str = "mwpm", weights=None):
        if method not in DECODERS:
            raise ValueError(f"unknown decoder {method!r}")
        if method == "weighted" and weights is None:
            raise ValueError("the weighted decoder needs edge weights")
        self.n = n
        self.method = method
        self.weights = UNIFORM if weights is None else tuple(weights)
        self._fn = DECODERS[method]
        self._cache: dict = {}

    def __call__(self, history, open_end: bool = False) -> np.ndarray:
        h = np.asarray(history, dtype=np.uint8)
        key = (h.shape, open_end, h.tobytes())
        out = self._cache.get(key)
        if out is None:
            out = self._fn(h, self.n, open_end, self.weights)
            self._cache[key] = out
        return out

    def batch(self, histories: np.ndarray, open_end: bool = False) -> np.ndarray:
        """(shots, R, n-1) histories to (shots, n) corrections."""
        hs = np.ascontiguousarray(histories, dtype=np.uint8)
        shots = hs.shape[0]
        out = np.zeros((shots, self.n), dtype=np.uint8)
        if shots == 0:
            return out
        flat = hs.reshape(shots, -1)
        nz = np.flatnonzero(flat.any(axis=1))
        if nz.size == 0:
            return out
        uniq, inverse = np.unique(flat[nz], axis=0, return_inverse=True)
        corr = np.array([self(u.reshape(hs.shape[1:]), open_end) for u in uniq])
        out[nz] = corr[inverse.reshape(-1)]
        return out
