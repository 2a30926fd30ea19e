# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise kernels for Christoffel assembly and connection terms."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def christoffel(double[:, :, :] ginv, double[:, :, :, :] dg):
    """ginv (d, d, P), dg (d, d, d, P) -> Gamma (d, d, d, P) with Gamma[a, b, c] = Gamma^c_ab."""
    cdef Py_ssize_t d = ginv.shape[0], P = ginv.shape[2]
    cdef Py_ssize_t a, b, c, e, p
    out_arr = np.zeros((d, d, d, P))
    cdef double[:, :, :, :] out = out_arr
    cdef double low
    for a in range(d):
        for b in range(a, d):
            for e in range(d):
                for p in range(P):
                    low = 0.5 * (dg[a, b, e, p] + dg[b, a, e, p] - dg[e, a, b, p])
                    for c in range(d):
                        out[a, b, c, p] += low * ginv[e, c, p]
            if b != a:
                for c in range(d):
                    for p in range(P):
                        out[b, a, c, p] = out[a, b, c, p]
    return out_arr


def connection_terms_flat(double[:, :] T, double[:, :, :, :] gamma, cnp.uint8_t[:] kinds, Py_ssize_t d):
    """T (d**r, P) -> (d * d**r, P) connection part of the covariant derivative.

    Points are processed in blocks so every output row is written once per block
    while the matching slices of T and gamma stay cache resident.
    """
    cdef Py_ssize_t r = kinds.shape[0]
    cdef Py_ssize_t K = T.shape[0], P = T.shape[1]
    cdef Py_ssize_t e, k, s, m, p, p0, p1, idx, kk
    cdef Py_ssize_t BS = 256
    cdef Py_ssize_t strides[16]
    cdef double acc[256]
    if r > 16:
        raise ValueError("rank above 16 not supported")
    for s in range(r):
        strides[s] = 1
        for kk in range(r - 1 - s):
            strides[s] *= d
    out_arr = np.empty((d * K, P))
    cdef double[:, :] out = out_arr
    p0 = 0
    while p0 < P:
        p1 = min(p0 + BS, P)
        for e in range(d):
            for k in range(K):
                for p in range(p1 - p0):
                    acc[p] = 0.0
                for s in range(r):
                    idx = (k // strides[s]) % d
                    for m in range(d):
                        kk = k + (m - idx) * strides[s]
                        if kinds[s]:
                            for p in range(p0, p1):
                                acc[p - p0] -= gamma[e, idx, m, p] * T[kk, p]
                        else:
                            for p in range(p0, p1):
                                acc[p - p0] += gamma[e, m, idx, p] * T[kk, p]
                for p in range(p0, p1):
                    out[e * K + k, p] = acc[p - p0]
        p0 = p1
    return out_arr


def sym_inverse_flat(double[:, :, :] g):
    """Cholesky-based inverse and determinant of SPD matrices, g (d, d, P)."""
    cdef Py_ssize_t d = g.shape[0], P = g.shape[2]
    cdef Py_ssize_t i, j, k, p
    inv_arr = np.zeros((d, d, P))
    det_arr = np.zeros(P)
    cdef double[:, :, :] inv = inv_arr
    cdef double[:] det = det_arr
    cdef double L[8][8]
    cdef double Li[8][8]
    cdef double acc
    if d > 8:
        raise ValueError("matrix size above 8 not supported")
    for p in range(P):
        for i in range(d):
            for j in range(i + 1):
                acc = g[i, j, p]
                for k in range(j):
                    acc -= L[i][k] * L[j][k]
                if i == j:
                    if acc <= 0.0:
                        raise np.linalg.LinAlgError("matrix not positive definite")
                    L[i][i] = acc ** 0.5
                else:
                    L[i][j] = acc / L[j][j]
        acc = 1.0
        for i in range(d):
            acc *= L[i][i]
        det[p] = acc * acc
        # invert the lower factor
        for i in range(d):
            for j in range(d):
                Li[i][j] = 0.0
        for i in range(d):
            Li[i][i] = 1.0 / L[i][i]
            for j in range(i):
                acc = 0.0
                for k in range(j, i):
                    acc -= L[i][k] * Li[k][j]
                Li[i][j] = acc / L[i][i]
        for i in range(d):
            for j in range(i + 1):
                acc = 0.0
                for k in range(i, d):
                    acc += Li[k][i] * Li[k][j]
                inv[i, j, p] = acc
                inv[j, i, p] = acc
    return inv_arr, det_arr
