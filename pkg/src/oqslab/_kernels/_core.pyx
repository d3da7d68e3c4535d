# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def supermatrix(U, d, Py_ssize_t d_S, Py_ssize_t d_E):
    cdef double complex[:, ::1] Um = np.ascontiguousarray(U, dtype=np.complex128)
    cdef double complex[:, ::1] dm = np.ascontiguousarray(d, dtype=np.complex128)
    out = np.zeros((d_S * d_S, d_S * d_S), dtype=np.complex128)
    cdef double complex[:, ::1] C = out
    # A[j1, g, i1, a2] = sum_a1 U[j1 g, i1 a1] d[a1, a2]
    A_arr = np.zeros((d_S * d_E, d_S * d_E), dtype=np.complex128)
    cdef double complex[:, ::1] A = A_arr
    cdef Py_ssize_t i1, i2, j1, j2, g, a1, a2, r1, r2
    cdef double complex acc, ua
    for r1 in range(d_S * d_E):
        for i1 in range(d_S):
            for a2 in range(d_E):
                acc = 0
                for a1 in range(d_E):
                    acc = acc + Um[r1, i1 * d_E + a1] * dm[a1, a2]
                A[r1, i1 * d_E + a2] = acc
    for i1 in range(d_S):
        for i2 in range(d_S):
            for j1 in range(d_S):
                for j2 in range(d_S):
                    acc = 0
                    for g in range(d_E):
                        r1 = j1 * d_E + g
                        r2 = j2 * d_E + g
                        for a2 in range(d_E):
                            ua = Um[r2, i2 * d_E + a2]
                            acc = acc + A[r1, i1 * d_E + a2] * (ua.real - 1j * ua.imag)
                    C[i1 * d_S + i2, j1 * d_S + j2] = acc
    return out


def sample_chain(cum, uniforms, init, int order):
    cdef double[:, ::1] c = np.ascontiguousarray(cum, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    init_arr = np.asarray(init, dtype=np.int64)
    cdef Py_ssize_t S = c.shape[1]
    cdef Py_ssize_t n0 = init_arr.shape[0]
    cdef Py_ssize_t n = n0 + u.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] seq = out
    cdef Py_ssize_t k, pos, row, s, nxt
    for k in range(n0):
        seq[k] = init_arr[k]
    for k in range(u.shape[0]):
        pos = k + n0
        if order == 1:
            row = seq[pos - 1]
        else:
            row = seq[pos - 2] * S + seq[pos - 1]
        nxt = S - 1
        for s in range(S):
            if u[k] < c[row, s]:
                nxt = s
                break
        seq[pos] = nxt
    return out


def count_transitions(seq, Py_ssize_t S, int order):
    cdef cnp.int64_t[::1] x = np.ascontiguousarray(seq, dtype=np.int64)
    counts = np.zeros((S,) * (order + 1), dtype=np.int64)
    cdef cnp.int64_t[::1] flat = counts.reshape(-1)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, m, idx
    for k in range(n - order):
        idx = 0
        for m in range(order + 1):
            idx = idx * S + x[k + m]
        flat[idx] += 1
    return counts
