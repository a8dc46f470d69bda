"""Fixed-step RK4 integration of Lindblad master equations.

The generator is never materialised as a d^2 x d^2 superoperator.  Each
right-hand side evaluation applies the sparse operators directly to a batch of
matrices through a numba kernel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._kernels import axpy_into, lindblad_rhs, rk4_combine, symmetrize

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    """Numerical failure during integration (NaN, step rejection cascade, no convergence)."""


def _as_coef(c) -> Callable[[float], complex] | complex:
    if callable(c):
        return c
    return complex(c)


class TimeDependentOperator:
    """Operator of the form sum_k f_k(t) O_k with constant sparse O_k.

    Coefficients are complex constants or callables of time.  Operators whose
    coefficients are all constant are summed once and cached.
    """

    def __init__(self, terms: Sequence[tuple], name: str = ""):
        if not terms:
            raise ValueError("operator needs at least one term")
        self.terms = tuple((_as_coef(c), sp.csr_array(op, dtype=complex)) for c, op in terms)
        shapes = {op.shape for _, op in self.terms}
        if len(shapes) != 1:
            raise ValueError(f"terms act on different spaces: {shapes}")
        self.shape = shapes.pop()
        self.name = name
        self.is_constant = not any(callable(c) for c, _ in self.terms)
        self._cached = None
        if self.is_constant:
            self._cached = self._sum(0.0)

    @classmethod
    def constant(cls, op, name: str = "") -> "TimeDependentOperator":
        return cls([(1.0, op)], name=name)

    def coefficients(self, t: float) -> np.ndarray:
        return np.array([c(t) if callable(c) else c for c, _ in self.terms], dtype=complex)

    def _sum(self, t: float) -> sp.csr_array:
        coefs = self.coefficients(t)
        out = coefs[0] * self.terms[0][1]
        for c, (_, op) in zip(coefs[1:], self.terms[1:]):
            out = out + c * op
        return sp.csr_array(out)

    def __call__(self, t: float) -> sp.csr_array:
        if self._cached is not None:
            return self._cached
        return self._sum(t)

    @property
    def dim(self) -> int:
        return self.shape[0]


@dataclass(frozen=True)
class GateSchedule:
    """Duration, Hamiltonian and rate-weighted jump operators of one gate."""

    duration: float
    dims: tuple
    hamiltonian: TimeDependentOperator | None = None
    dissipators: tuple = ()
    name: str = "custom"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.duration > 0 or not math.isfinite(self.duration):
            raise ValueError(f"duration must be positive and finite, got {self.duration}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "dissipators", tuple((float(r), L) for r, L in self.dissipators))
        d = self.dim
        for rate, L in self.dissipators:
            if rate < 0:
                raise ValueError(f"negative dissipation rate {rate}")
            if L.shape != (d, d):
                raise ValueError(f"jump operator shape {L.shape} does not match space dimension {d}")
        if self.hamiltonian is not None and self.hamiltonian.shape != (d, d):
            raise ValueError("Hamiltonian shape does not match the space")

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def max_rate(self) -> float:
        rates = [r for r, _ in self.dissipators if r > 0]
        return max(rates) if rates else 1.0

    def with_duration(self, duration: float) -> "GateSchedule":
        return GateSchedule(duration, self.dims, self.hamiltonian, self.dissipators,
                            self.name, dict(self.info))


@dataclass
class EvolutionResult:
    final_state: np.ndarray
    trace_drift: float
    steps: int
    dt: float
    trajectory: list = field(default_factory=list)
    min_eigenvalue: float | None = None


class _CompiledGenerator:
    """Coefficient tables that assemble G(t) and the L_l(t) on fixed patterns."""

    def __init__(self, schedule: GateSchedule):
        d = schedule.dim
        self.d = d
        fns = [1.0]
        index = {}

        def slot(coef):
            key = id(coef) if callable(coef) else ("c", coef)
            if key not in index:
                index[key] = len(fns)
                fns.append(coef)
            return index[key]

        g_terms, g_a, g_b, g_w = [], [], [], []
        if schedule.hamiltonian is not None:
            for coef, op in schedule.hamiltonian.terms:
                g_terms.append(op)
                g_a.append(0)
                g_b.append(slot(coef))
                g_w.append(-1j)
        self.jumps = []
        for rate, L in schedule.dissipators:
            if rate == 0:
                continue
            slots = [slot(c) for c, _ in L.terms]
            ops = [op for _, op in L.terms]
            for i, (si, oi) in enumerate(zip(slots, ops)):
                for j, (sj, oj) in enumerate(zip(slots, ops)):
                    g_terms.append(sp.csr_array(oi.conj().T @ oj))
                    g_a.append(si)
                    g_b.append(sj)
                    g_w.append(-0.5 * rate)
            self.jumps.append((math.sqrt(rate), np.array(slots), ops))
        self.fns = fns
        self.const_mask = np.array([not callable(f) for f in fns])
        self.const_vals = np.array([0 if callable(f) else f for f in fns], dtype=complex)
        self.g_a = np.array(g_a, dtype=np.int64)
        self.g_b = np.array(g_b, dtype=np.int64)
        self.g_w = np.array(g_w, dtype=complex)
        if g_terms:
            self.hp, self.hi, self.hmat = _pattern(g_terms, d)
        else:
            self.hp = np.zeros(d + 1, dtype=np.int64)
            self.hi = np.zeros(0, dtype=np.int64)
            self.hmat = np.zeros((0, 0), dtype=complex)
        lps, lis, self.lmats = [], [], []
        offset = 0
        for _, _, ops in self.jumps:
            p, i, m = _pattern(ops, d)
            lps.append(p + offset)
            lis.append(i)
            self.lmats.append(m)
            offset += len(i)
        self.lp = np.concatenate(lps) if lps else np.zeros(0, dtype=np.int64)
        self.li = np.concatenate(lis) if lis else np.zeros(0, dtype=np.int64)
        self.nl = len(self.jumps)
        self._cache_t = None
        self._cache = None

    def arrays(self, t: float):
        if self._cache_t == t:
            return self._cache
        vals = self.const_vals.copy()
        for k, f in enumerate(self.fns):
            if not self.const_mask[k]:
                vals[k] = f(t)
        if len(self.g_w):
            hv = (self.g_w * np.conj(vals[self.g_a]) * vals[self.g_b]) @ self.hmat
        else:
            hv = np.zeros(0, dtype=complex)
        lv = [s * (vals[slots] @ m) for (s, slots, _), m in zip(self.jumps, self.lmats)]
        lv = np.concatenate(lv) if lv else np.zeros(0, dtype=complex)
        self._cache_t = t
        self._cache = (np.ascontiguousarray(hv), np.ascontiguousarray(lv))
        return self._cache

    def apply(self, t: float, rho: np.ndarray, out: np.ndarray, hermitian: bool) -> np.ndarray:
        hv, lv = self.arrays(t)
        lindblad_rhs(rho, self.hp, self.hi, hv, self.lp, self.li, lv, self.nl, out, hermitian)
        return out


def _pattern(ops, d):
    """Union CSR pattern of ``ops`` and the (n_ops, nnz) scatter of their data."""
    keys = []
    for op in ops:
        coo = sp.coo_array(op)
        keys.append(coo.row.astype(np.int64) * d + coo.col.astype(np.int64))
    union = np.unique(np.concatenate(keys)) if keys else np.zeros(0, dtype=np.int64)
    mat = np.zeros((len(ops), len(union)), dtype=complex)
    for n, (op, k) in enumerate(zip(ops, keys)):
        pos = np.searchsorted(union, k)
        np.add.at(mat[n], pos, sp.coo_array(op).data)
    rows = union // d
    indptr = np.zeros(d + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    return indptr, (union % d).astype(np.int64), mat


# Largest |h lambda| accepted for classical RK4 (stability boundary is ~2.78).
RK4_STABILITY = 2.5


def spectral_radius_estimate(gen, t: float = 0.0, iters: int = 30, seed: int = 0) -> float:
    """Power-iteration estimate of the largest |eigenvalue| of the generator at time t."""
    rng = np.random.default_rng(seed)
    d = gen.d
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    x = np.ascontiguousarray((x + x.conj().T)[:, :, None])
    out = np.empty_like(x)
    lam = 0.0
    for _ in range(iters):
        x /= np.linalg.norm(x)
        gen.apply(t, x, out, False)
        lam = float(np.linalg.norm(out))
        x, out = out, x
    return lam


def check_step(gen, T: float, dt: float) -> None:
    """Abort when the fixed step lies outside the RK4 stability region."""
    lam = max(spectral_radius_estimate(gen, t) for t in (0.0, 0.25 * T, 0.5 * T))
    if dt * lam > RK4_STABILITY:
        raise IntegrationError(
            f"dt={dt:.3g} is unstable for RK4: spectral radius ~{lam:.3g} needs dt < {RK4_STABILITY / lam:.3g}"
        )


def _rk4_step(gen, t, y, h, hermitian, work):
    """One classical RK4 step; returns a new array and leaves ``y`` untouched."""
    k1, k2, k3, k4, tmp = work
    gen.apply(t, y, k1, hermitian)
    axpy_into(tmp, y, 0.5 * h, k1)
    gen.apply(t + 0.5 * h, tmp, k2, hermitian)
    axpy_into(tmp, y, 0.5 * h, k2)
    gen.apply(t + 0.5 * h, tmp, k3, hermitian)
    axpy_into(tmp, y, h, k3)
    gen.apply(t + h, tmp, k4, hermitian)
    out = y.copy()
    rk4_combine(out, k1, k2, k3, k4, h)
    return out


def default_dt(schedule: GateSchedule) -> float:
    """1e-3 divided by the largest dissipation rate."""
    return 1e-3 / schedule.max_rate


def _symmetrize(y):
    symmetrize(y)


def _integrate(gen, y, T, dt, hermitian, snapshots=0, on_snapshot=None, t0=0.0):
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n_steps
    work = [np.empty_like(y) for _ in range(5)]
    snap_at = set()
    if snapshots:
        snap_at = {int(round(k * n_steps / snapshots)) for k in range(1, snapshots + 1)}
    for step in range(n_steps):
        t = t0 + step * h
        y = _rk4_step(gen, t, y, h, hermitian, work)
        if hermitian:
            _symmetrize(y)
        if not np.isfinite(y[0, 0]).all() or (step % 50 == 49 and not np.isfinite(y).all()):
            raise IntegrationError(f"non-finite state at t={t + h:.6g}")
        if on_snapshot is not None and (step + 1) in snap_at:
            on_snapshot(t + h, y)
    if not np.isfinite(y).all():
        raise IntegrationError("non-finite state at end of integration")
    return y, n_steps, h


def _integrate_adaptive(gen, y, T, tol, hermitian, h0, max_rejects=30):
    """RK4 with step doubling; error measured as max-abs difference."""
    t = 0.0
    h = h0
    steps = 0
    work = [np.empty_like(y) for _ in range(5)]
    rejects = 0
    h_min = T * 1e-12
    while t < T * (1 - 1e-12):
        h = min(h, T - t)
        full = _rk4_step(gen, t, y, h, hermitian, work)
        half = _rk4_step(gen, t, y, 0.5 * h, hermitian, work)
        half = _rk4_step(gen, t + 0.5 * h, half, 0.5 * h, hermitian, work)
        err = float(np.abs(full - half).max()) / 15.0
        if not math.isfinite(err):
            err = math.inf
        if err <= tol:
            y = half + (half - full) / 15.0
            if hermitian:
                _symmetrize(y)
            t += h
            steps += 1
            rejects = 0
            h *= min(2.0, 0.9 * (tol / max(err, 1e-300)) ** 0.2)
        else:
            rejects += 1
            if rejects > max_rejects or h < h_min:
                raise IntegrationError(
                    f"step rejection cascade at t={t:.6g}: error {err:.3g} > tol {tol:.3g} with h={h:.3g}"
                )
            h *= max(0.1, 0.9 * (tol / err) ** 0.2) if math.isfinite(err) else 0.1
    if not np.isfinite(y).all():
        raise IntegrationError("non-finite state at end of integration")
    return y, steps, T / max(steps, 1)


def evolve(rho0, schedule: GateSchedule, dt: float | None = None, tol: float | None = None,
           snapshots: int = 0, check_positivity: bool = True) -> EvolutionResult:
    """Integrate the master equation of ``schedule`` from ``rho0`` over [0, T].

    Either a fixed step ``dt`` (default 1e-3 / kappa_max) or an error tolerance
    ``tol`` in (0, 1e-3] for step-doubling control.  ``snapshots`` evenly spaced
    intermediate states are returned in ``trajectory`` as (t, rho) pairs.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    if rho0.shape != (schedule.dim, schedule.dim):
        raise ValueError(f"state of shape {rho0.shape} does not live on a space of dimension {schedule.dim}")
    if dt is not None and not dt > 0:
        raise ValueError("dt must be positive")
    if tol is not None and not (0 < tol <= 1e-3):
        raise ValueError("tolerance must lie in (0, 1e-3]")
    gen = _CompiledGenerator(schedule)
    y = np.ascontiguousarray(rho0[:, :, None])
    tr0 = np.trace(rho0).real
    traj = [(0.0, rho0.copy())] if snapshots else []

    def record(t, state):
        traj.append((t, state[:, :, 0].copy()))

    if tol is not None:
        y, steps, h = _integrate_adaptive(gen, y, schedule.duration, tol, True,
                                          dt or default_dt(schedule) * 10)
    else:
        dt = dt or default_dt(schedule)
        check_step(gen, schedule.duration, dt)
        y, steps, h = _integrate(gen, y, schedule.duration, dt, True,
                                 snapshots, record if snapshots else None)
    rho = y[:, :, 0].copy()
    drift = float(abs(np.trace(rho).real - tr0))
    min_eig = float(np.linalg.eigvalsh(rho).min()) if check_positivity else None
    return EvolutionResult(rho, drift, steps, h, traj, min_eig)


def propagate_operators(ops, schedule: GateSchedule, dt: float | None = None,
                        hermitian: bool = False, max_trace_drift: float = 1e-6) -> np.ndarray:
    """Apply the gate channel to a batch of (not necessarily Hermitian) operators.

    ``ops`` has shape (K, d, d); the result has the same shape.  With
    ``hermitian`` every operator must be Hermitian, which halves the work.
    """
    ops = np.asarray(ops, dtype=complex)
    if ops.ndim == 2:
        ops = ops[None]
    if ops.shape[1:] != (schedule.dim, schedule.dim):
        raise ValueError("operator batch does not match the schedule space")
    gen = _CompiledGenerator(schedule)
    dt = dt or default_dt(schedule)
    check_step(gen, schedule.duration, dt)
    traces = np.trace(ops, axis1=1, axis2=2)
    y = np.ascontiguousarray(np.moveaxis(ops, 0, -1))
    y, _, _ = _integrate(gen, y, schedule.duration, dt, hermitian)
    out = np.ascontiguousarray(np.moveaxis(y, -1, 0))
    drift = float(np.abs(np.trace(out, axis1=1, axis2=2) - traces).max())
    if drift > max_trace_drift:
        raise IntegrationError(f"trace drift {drift:.3g} exceeds {max_trace_drift:.1g}")
    return out


def effective_hamiltonian(schedule: GateSchedule, t: float) -> sp.csr_array:
    """H(t) - (i/2) sum_k rate_k L_k(t)^dag L_k(t), the no-jump generator."""
    d = schedule.dim
    H = schedule.hamiltonian(t) if schedule.hamiltonian is not None else sp.csr_array((d, d), dtype=complex)
    for rate, L in schedule.dissipators:
        if rate:
            Lt = L(t)
            H = H - 0.5j * rate * (Lt.conj().T @ Lt)
    return sp.csr_array(H)


def no_jump_evolve(kets, schedule: GateSchedule, dt: float | None = None) -> np.ndarray:
    """Evolve kets under the no-jump generator with fixed-step RK4.

    The returned kets are unnormalised; their squared norm is the probability
    that no jump occurred.  Since every jump branch contributes a positive
    term, ``|<target|psi>|^2`` of the returned ket lower-bounds the fidelity of
    the full master-equation output with ``target``.
    """
    y = np.array(kets, dtype=complex, ndmin=2)
    if y.shape[-1] != schedule.dim:
        raise ValueError("kets do not match the schedule space")
    y = np.ascontiguousarray(y.T)
    dt = dt or default_dt(schedule)
    T = schedule.duration
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n
    lam = spla.norm(effective_hamiltonian(schedule, 0.0), 1)
    if h * lam > RK4_STABILITY * 4:
        raise IntegrationError(f"dt={h:.3g} is far outside the RK4 region for norm {lam:.3g}")

    def f(t, v):
        return -1j * (effective_hamiltonian(schedule, t) @ v)

    t = 0.0
    for _ in range(n):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    if not np.isfinite(y).all() or (np.linalg.norm(y, axis=0) > 1 + 1e-8).any():
        raise IntegrationError("no-jump evolution diverged; reduce dt")
    return np.ascontiguousarray(y.T)


def jump_trajectories(kets, schedule: GateSchedule, n_traj: int, seed: int = 0,
                      dt: float | None = None, no_jump_probability=None) -> np.ndarray:
    """Quantum-jump unravelling of the master equation, all trajectories batched.

    Returns normalised final kets of shape (len(kets), n_traj, d).  Averages of
    ``|psi><psi|`` over trajectories are unbiased estimates of the evolved
    density matrices.  Jump times are resolved to the step ``dt``.

    With ``no_jump_probability`` (one value per ket, from :func:`no_jump_evolve`)
    every trajectory is conditioned on at least one jump before T.
    """
    k0 = np.array(kets, dtype=complex, ndmin=2)
    if k0.shape[-1] != schedule.dim:
        raise ValueError("kets do not match the schedule space")
    if n_traj < 1:
        raise ValueError("n_traj must be positive")
    n_k, d = k0.shape
    rng = np.random.default_rng(seed)
    y = np.ascontiguousarray(np.repeat(k0, n_traj, axis=0).T)
    thresholds = rng.random(y.shape[1])
    if no_jump_probability is not None:
        p0 = np.repeat(np.asarray(no_jump_probability, dtype=float), n_traj)
        thresholds = p0 + (1 - p0) * thresholds
    dt = dt or default_dt(schedule)
    T = schedule.duration
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n
    cache = {}

    def heff(t):
        if t not in cache:
            if len(cache) > 4:
                cache.clear()
            cache[t] = effective_hamiltonian(schedule, t)
        return cache[t]

    jumps = [(r, L) for r, L in schedule.dissipators if r]
    t = 0.0
    for step in range(n):
        k1 = -1j * (heff(t) @ y)
        k2 = -1j * (heff(t + h / 2) @ (y + h / 2 * k1))
        k3 = -1j * (heff(t + h / 2) @ (y + h / 2 * k2))
        k4 = -1j * (heff(t + h) @ (y + h * k3))
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (step + 1) * h
        norms = np.einsum("ij,ij->j", y.conj(), y).real
        hit = np.flatnonzero(norms < thresholds)
        if len(hit):
            ops = [math.sqrt(r) * L(t) for r, L in jumps]
            for j in hit:
                cand = [op @ y[:, j] for op in ops]
                w = np.array([np.vdot(c, c).real for c in cand])
                k = rng.choice(len(cand), p=w / w.sum())
                y[:, j] = cand[k] / math.sqrt(w[k])
                thresholds[j] = rng.random()
    if not np.isfinite(y).all():
        raise IntegrationError("trajectory integration diverged; reduce dt")
    y = y / np.linalg.norm(y, axis=0)
    return np.ascontiguousarray(y.T).reshape(n_k, n_traj, d)


def trajectory_fidelities(kets, targets, schedule: GateSchedule, n_traj: int, seed: int = 0,
                          dt: float | None = None):
    """Estimate <target| E(|psi><psi|) |target> for each (ket, target) pair.

    The no-jump branch is integrated exactly and only trajectories with at
    least one jump are sampled, so the sampling error is scaled by the jump
    probability.  Returns (estimates, standard errors, jump probabilities).
    """
    kets = np.array(kets, dtype=complex, ndmin=2)
    targets = np.array(targets, dtype=complex, ndmin=2)
    nj = no_jump_evolve(kets, schedule, dt)
    p0 = np.clip(np.einsum("ij,ij->i", nj.conj(), nj).real, 0, 1)
    f0 = np.abs(np.einsum("ij,ij->i", targets.conj(), nj)) ** 2
    out = jump_trajectories(kets, schedule, n_traj, seed, dt, no_jump_probability=p0)
    fj = np.abs(np.einsum("kd,ktd->kt", targets.conj(), out)) ** 2
    est = f0 + (1 - p0) * fj.mean(axis=1)
    err = (1 - p0) * fj.std(axis=1, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.full(len(p0), np.inf)
    return est, err, 1 - p0


def lindblad_rhs_dense(schedule: GateSchedule, t: float, rho: np.ndarray) -> np.ndarray:
    """Reference right-hand side with dense matrix algebra (slow, for checks)."""
    H = schedule.hamiltonian(t).toarray() if schedule.hamiltonian is not None else 0
    out = -1j * (H @ rho - rho @ H) if schedule.hamiltonian is not None else np.zeros_like(rho)
    for rate, L in schedule.dissipators:
        Lm = L(t).toarray()
        LdL = Lm.conj().T @ Lm
        out = out + rate * (Lm @ rho @ Lm.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def steady_state(schedule: GateSchedule, rho0, dt: float | None = None, tol: float = 1e-8,
                 max_time: float = 200.0, chunk: float = 1.0) -> np.ndarray:
    """Integrate a time-independent schedule until ||drho/dt|| < tol.

    The norm is the Frobenius norm of the right-hand side.  Raises
    ``IntegrationError`` if ``max_time`` is reached first.
    """
    for _, L in schedule.dissipators:
        if not L.is_constant:
            raise ValueError("steady_state needs time-independent operators")
    if schedule.hamiltonian is not None and not schedule.hamiltonian.is_constant:
        raise ValueError("steady_state needs a time-independent Hamiltonian")
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    gen = _CompiledGenerator(schedule)
    y = np.ascontiguousarray(rho[:, :, None])
    buf = np.empty_like(y)
    dt = dt or default_dt(schedule)
    check_step(gen, chunk, dt)
    t = 0.0
    while True:
        gen.apply(0.0, y, buf, True)
        resid = float(np.linalg.norm(buf[:, :, 0]))
        if resid < tol:
            return y[:, :, 0].copy()
        if t >= max_time:
            raise IntegrationError(
                f"no steady state within t={max_time}: residual {resid:.3g} above {tol:.1g}"
            )
        y, _, _ = _integrate(gen, y, chunk, dt, True, t0=t)
        t += chunk
