"""Truncated Fock-space operators, coherent and cat states, and phase-space tools.

Operators are returned as scipy CSR sparse arrays (ladder operators and their
products are banded); state vectors and density matrices are dense numpy arrays.
Mode ordering in tensor products is left to right, matching ``np.kron``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.linalg import sqrtm
from scipy.special import eval_genlaguerre, gammaln

# Tail weight above which coherent-state truncation is rejected.
TAIL_REJECT = 1e-6


class TruncationError(ValueError):
    """Raised when a Fock truncation cannot represent the requested state."""


@dataclass(frozen=True)
class ModeSpace:
    """Fock basis |0>..|dim-1> of a single bosonic mode."""

    truncation_dim: int

    def __post_init__(self):
        n = self.truncation_dim
        if isinstance(n, bool) or int(n) != n or n < 2:
            raise ValueError(f"truncation dimension must be an integer >= 2, got {n}")

    @property
    def dim(self) -> int:
        return int(self.truncation_dim)


@dataclass(frozen=True)
class CatQubitParams:
    """Physical parameters of a two-photon stabilised cat qubit.

    Rates are in units of inverse time; ``kappa2`` usually sets the unit.
    """

    alpha: complex
    kappa2: float = 1.0
    kappa1: float = 0.0
    n_th: float = 0.0
    kappa_phi: float = 0.0

    def __post_init__(self):
        if not self.kappa2 > 0:
            raise ValueError("kappa2 must be positive")
        for name in ("kappa1", "n_th", "kappa_phi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def nbar(self) -> float:
        return abs(self.alpha) ** 2

    @classmethod
    def from_nbar(cls, nbar: float, **kwargs) -> "CatQubitParams":
        return cls(alpha=math.sqrt(nbar), **kwargs)

    def to_dict(self) -> dict:
        alpha = complex(self.alpha)
        return {
            "alpha": alpha.real if alpha.imag == 0 else [alpha.real, alpha.imag],
            "kappa2": self.kappa2,
            "kappa1": self.kappa1,
            "n_th": self.n_th,
            "kappa_phi": self.kappa_phi,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CatQubitParams":
        data = dict(data)
        if "nbar" in data:
            data["alpha"] = math.sqrt(data.pop("nbar"))
        alpha = data.pop("alpha")
        if isinstance(alpha, (list, tuple)):
            alpha = complex(alpha[0], alpha[1])
        return cls(alpha=alpha, **data)


def default_truncation(alpha: complex) -> int:
    """Default Fock cutoff ``ceil(|a|^2 + 8|a| + 10)``."""
    r = abs(alpha)
    return int(math.ceil(r * r + 8 * r + 10))


def _dim(space) -> int:
    return space.dim if isinstance(space, ModeSpace) else int(space)


# ---------------------------------------------------------------- operators


def destroy(space) -> sp.csr_array:
    n = _dim(space)
    return sp.csr_array(sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, dtype=complex))


annihilation = destroy


def create(space) -> sp.csr_array:
    return destroy(space).conj().T.tocsr()


def number(space) -> sp.csr_array:
    n = _dim(space)
    return sp.csr_array(sp.diags(np.arange(n, dtype=float), 0, dtype=complex))


def identity(space) -> sp.csr_array:
    return sp.csr_array(sp.identity(_dim(space), dtype=complex, format="csr"))


def parity_operator(space) -> sp.csr_array:
    n = _dim(space)
    return sp.csr_array(sp.diags((-1.0) ** np.arange(n), 0, dtype=complex))


def embed(op, mode: int, dims) -> sp.csr_array:
    """Lift a single-mode operator to the composite space ``dims``."""
    factors = [op if k == mode else identity(d) for k, d in enumerate(dims)]
    return reduce(lambda x, y: sp.kron(x, y, format="csr"), factors)


def mode_operators(dims) -> list[sp.csr_array]:
    """Annihilation operator of every mode, embedded in the composite space."""
    return [embed(destroy(d), k, dims) for k, d in enumerate(dims)]


def tensor(*factors):
    """Kronecker product of operators or of state vectors (mode order kept)."""
    if len(factors) == 1 and isinstance(factors[0], (list, tuple)):
        factors = tuple(factors[0])
    if not factors:
        raise ValueError("tensor of nothing")
    kinds = {_kind(f) for f in factors}
    if len(kinds) != 1:
        raise TypeError("cannot mix state vectors and operators in a tensor product")
    if kinds == {"vector"}:
        return reduce(np.kron, [np.asarray(f) for f in factors])
    if all(sp.issparse(f) for f in factors):
        return sp.csr_array(reduce(lambda x, y: sp.kron(x, y, format="csr"), factors))
    return reduce(np.kron, [f.toarray() if sp.issparse(f) else np.asarray(f) for f in factors])


def _kind(obj) -> str:
    if sp.issparse(obj):
        return "operator"
    arr = np.asarray(obj)
    if arr.ndim == 1:
        return "vector"
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        return "operator"
    raise TypeError(f"unsupported tensor factor with shape {arr.shape}")


# ------------------------------------------------------------------- states


def basis(space, n: int) -> np.ndarray:
    vec = np.zeros(_dim(space), dtype=complex)
    vec[n] = 1.0
    return vec


def coherent_tail_weight(alpha: complex, dim: int) -> float:
    """Poisson weight of |alpha> on Fock states >= dim."""
    from scipy.stats import poisson

    return float(poisson.sf(dim - 1, abs(alpha) ** 2))


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    n = np.arange(dim)
    if alpha == 0:
        return basis(dim, 0)
    log_mag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
    phase = np.exp(1j * n * np.angle(alpha))
    return np.exp(log_mag) * phase


def coherent_state(alpha: complex, space) -> np.ndarray:
    """Normalised truncated coherent state |alpha>."""
    dim = _dim(space)
    tail = coherent_tail_weight(alpha, dim)
    if tail >= TAIL_REJECT:
        raise TruncationError(
            f"truncation {dim} too small for |alpha|={abs(alpha):.3g} (tail weight {tail:.2e})"
        )
    vec = coherent_amplitudes(alpha, dim).astype(complex)
    return vec / np.linalg.norm(vec)


def cat_state(alpha: complex, parity: str, space) -> np.ndarray:
    """Even (``'even'``/``'+'``) or odd (``'odd'``/``'-'``) cat state.

    Built by projecting the coherent state on the parity sector, which is exact
    on the truncated space and makes the parity support exact.
    """
    sign = _parity_sign(parity)
    dim = _dim(space)
    if alpha == 0:
        if sign < 0:
            raise ValueError("odd cat state is undefined at alpha = 0")
        return basis(dim, 0)
    coh = coherent_state(alpha, dim)
    mask = (np.arange(dim) % 2 == 0) if sign > 0 else (np.arange(dim) % 2 == 1)
    vec = np.where(mask, coh, 0.0)
    norm = np.linalg.norm(vec)
    if norm < 1e-150:
        raise ValueError("cat state has vanishing norm")
    vec = vec / norm
    return _fix_phase(vec)


def _parity_sign(parity) -> int:
    if parity in ("even", "+", +1, "plus"):
        return +1
    if parity in ("odd", "-", -1, "minus"):
        return -1
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Real positive amplitude on the lowest non-negligible Fock component."""
    idx = int(np.argmax(np.abs(vec) > 1e-14 * np.abs(vec).max()))
    return vec * (abs(vec[idx]) / vec[idx])


def cat_computational_states(alpha: complex, space) -> tuple[np.ndarray, np.ndarray]:
    """(|0>_c, |1>_c) = (C+ +/- C-)/sqrt(2), close to |alpha> and |-alpha>."""
    plus = cat_state(alpha, "even", space)
    minus = cat_state(alpha, "odd", space)
    return (plus + minus) / math.sqrt(2), (plus - minus) / math.sqrt(2)


def code_isometry(alpha: complex, space) -> np.ndarray:
    """dim x 2 matrix whose columns are |0>_c and |1>_c."""
    zero, one = cat_computational_states(alpha, space)
    return np.column_stack([zero, one])


def code_projector(alpha: complex, space) -> np.ndarray:
    """Projector on span{|C+>, |C->} as a dense matrix."""
    plus = cat_state(alpha, "even", space)
    minus = cat_state(alpha, "odd", space)
    return np.outer(plus, plus.conj()) + np.outer(minus, minus.conj())


def leakage(rho: np.ndarray, projector: np.ndarray) -> float:
    return float(1.0 - np.real(np.trace(projector @ rho @ projector)))


def ket2dm(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec)
    return np.outer(vec, vec.conj())


def density_matrix(data, *, atol_herm: float = 1e-9, atol_trace: float = 1e-7,
                   atol_pos: float = 1e-7) -> np.ndarray:
    """Validate a density matrix (or build one from a ket)."""
    rho = np.asarray(data, dtype=complex)
    if rho.ndim == 1:
        rho = ket2dm(rho / np.linalg.norm(rho))
    if np.abs(rho - rho.conj().T).max() > atol_herm:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol_trace:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.3g}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -atol_pos:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def state_fidelity(a, b) -> float:
    """|<a|b>|^2 for kets, <a|rho|a> for ket/matrix, Uhlmann fidelity otherwise."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 1 and b.ndim == 1:
        return float(abs(np.vdot(a, b)) ** 2)
    if a.ndim == 1:
        return float(np.real(np.vdot(a, b @ a)))
    if b.ndim == 1:
        return float(np.real(np.vdot(b, a @ b)))
    sa = sqrtm(a)
    inner = sqrtm(sa @ b @ sa)
    return float(np.real(np.trace(inner)) ** 2)


def expect(op, state) -> complex:
    state = np.asarray(state)
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.trace(op @ state))


# ----------------------------------------------------------- phase space


def displacement(beta: complex, space, pad: int | None = None) -> np.ndarray:
    """D(beta) computed on a padded space and truncated back."""
    from scipy.linalg import expm

    dim = _dim(space)
    if pad is None:
        pad = int(abs(beta) ** 2 + 10 * abs(beta) + 30)
    big = dim + pad
    a = destroy(big).toarray()
    return expm(beta * a.conj().T - np.conj(beta) * a)[:dim, :dim]


def _wigner_kernel(beta: np.ndarray, dim: int) -> np.ndarray:
    """K[m, n](beta) such that W(beta) = sum_mn rho[m, n] K[n, m](beta)."""
    beta = np.asarray(beta, dtype=complex)
    r2 = 4.0 * np.abs(beta) ** 2
    env = (2.0 / np.pi) * np.exp(-0.5 * r2)
    ker = np.zeros((dim, dim) + beta.shape, dtype=complex)
    for n in range(dim):
        for m in range(n, dim):
            k = m - n
            log_pref = 0.5 * (gammaln(n + 1) - gammaln(m + 1))
            val = ((-1) ** n) * np.exp(log_pref) * (2 * beta) ** k
            val = val * eval_genlaguerre(n, k, r2) * env
            ker[m, n] = val
            if k:
                ker[n, m] = np.conj(val)
    return ker


def wigner_grid(rho, x_range, p_range, step):
    """Wigner function on a regular grid with spacing ``step``.

    Returns ``(xvec, pvec, W)`` with ``W`` of shape ``(len(pvec), len(xvec))``.
    """
    xvec = grid_axis(x_range[0], x_range[1], step)
    pvec = grid_axis(p_range[0], p_range[1], step)
    return xvec, pvec, wigner(rho, xvec, pvec)


def wigner(rho, xvec, pvec) -> np.ndarray:
    """W(beta) = (2/pi) Tr[rho D(beta) P D(beta)^dag] with ``beta = x + i p``.

    Uses the closed Laguerre form of displaced-parity matrix elements.
    """
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = ket2dm(rho)
    xs, ps = np.meshgrid(np.asarray(xvec, float), np.asarray(pvec, float))
    ker = _wigner_kernel(xs + 1j * ps, rho.shape[0])
    return np.real(np.einsum("mn,nm...->...", rho, ker))


def grid_axis(lo: float, hi: float, step: float) -> np.ndarray:
    if not step > 0:
        raise ValueError("grid step must be positive")
    if hi < lo:
        raise ValueError("grid upper bound below lower bound")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def write_grid_csv(path, values: np.ndarray, xvec, pvec, header: dict | None = None) -> None:
    """Row-major CSV with '#'-prefixed grid metadata."""
    lines = []
    for key, val in (header or {}).items():
        lines.append(f"# {key}: {val}")
    lines.append(f"# x: start={xvec[0]!r} step={_step(xvec)!r} count={len(xvec)}")
    lines.append(f"# p: start={pvec[0]!r} step={_step(pvec)!r} count={len(pvec)}")
    lines.append("# rows: p ascending; columns: x ascending")
    for row in np.asarray(values):
        lines.append(",".join(f"{v:.12e}" for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_state_csv(path, state, header: dict | None = None) -> None:
    """Fock amplitudes (ket) or matrix entries (density matrix) as CSV."""
    state = np.asarray(state)
    lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
    if state.ndim == 1:
        lines.append("n,re,im")
        lines += [f"{n},{z.real:.15e},{z.imag:.15e}" for n, z in enumerate(state)]
    else:
        lines.append("row,col,re,im")
        for (i, j), z in np.ndenumerate(state):
            lines.append(f"{i},{j},{z.real:.15e},{z.imag:.15e}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _step(axis) -> float:
    return float(axis[1] - axis[0]) if len(axis) > 1 else 0.0
