"""Numba kernel for the Lindblad right-hand side on a batch of matrices.

Batch layout is ``(d, d, K)`` with the batch index innermost, so the sparse
row loops stream over contiguous memory.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True, fastmath=True, nogil=True)
def lindblad_rhs(rho, hp, hi, hv, lp, li, lv, nl, out, hermitian):
    """out = G rho + rho G^dag + sum_l L_l rho L_l^dag for every batch slice.

    ``G`` (CSR arrays hp, hi, hv) is the effective generator -iH - 1/2 sum L^dag L.
    The jump operators are packed CSR with ``d + 1`` indptr entries each.
    With ``hermitian`` set, every slice is assumed Hermitian and only the upper
    triangle is computed, then mirrored.
    """
    d = rho.shape[0]
    K = rho.shape[2]
    acc = np.empty(K, dtype=np.complex128)
    for i in range(d):
        j0 = i if hermitian else 0
        for j in range(j0, d):
            for k in range(K):
                acc[k] = 0.0
            for a in range(hp[i], hp[i + 1]):
                c = hv[a]
                p = hi[a]
                for k in range(K):
                    acc[k] += c * rho[p, j, k]
            for b in range(hp[j], hp[j + 1]):
                c = np.conj(hv[b])
                q = hi[b]
                for k in range(K):
                    acc[k] += c * rho[i, q, k]
            for l in range(nl):
                off = l * (d + 1)
                for a in range(lp[off + i], lp[off + i + 1]):
                    ca = lv[a]
                    pa = li[a]
                    for b in range(lp[off + j], lp[off + j + 1]):
                        c = ca * np.conj(lv[b])
                        q = li[b]
                        for k in range(K):
                            acc[k] += c * rho[pa, q, k]
            for k in range(K):
                out[i, j, k] = acc[k]
            if hermitian and j > i:
                for k in range(K):
                    out[j, i, k] = np.conj(acc[k])


@nb.njit(cache=True, fastmath=True, nogil=True)
def axpy_into(out, y, c, k):
    """out = y + c k, elementwise over flat views."""
    fo = out.reshape(-1)
    fy = y.reshape(-1)
    fk = k.reshape(-1)
    for n in range(fo.size):
        fo[n] = fy[n] + c * fk[n]


@nb.njit(cache=True, fastmath=True, nogil=True)
def rk4_combine(y, k1, k2, k3, k4, h):
    """y += h/6 (k1 + 2 k2 + 2 k3 + k4) in place."""
    fy = y.reshape(-1)
    f1 = k1.reshape(-1)
    f2 = k2.reshape(-1)
    f3 = k3.reshape(-1)
    f4 = k4.reshape(-1)
    w = h / 6.0
    for n in range(fy.size):
        fy[n] += w * (f1[n] + 2.0 * (f2[n] + f3[n]) + f4[n])


@nb.njit(cache=True, fastmath=True, nogil=True)
def symmetrize(y):
    """Replace every slice by its Hermitian part, in place."""
    d = y.shape[0]
    K = y.shape[2]
    for i in range(d):
        for k in range(K):
            y[i, i, k] = y[i, i, k].real
        for j in range(i + 1, d):
            for k in range(K):
                v = 0.5 * (y[i, j, k] + np.conj(y[j, i, k]))
                y[i, j, k] = v
                y[j, i, k] = np.conj(v)
