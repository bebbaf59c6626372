# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise kernels; see ``_kernels_py.py`` for the reference versions."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def node_contract(double[::1] weights, samples):
    cdef double[:, ::1] s = np.ascontiguousarray(samples, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], m = s.shape[1], i, x
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double w
    for i in range(n):
        w = weights[i]
        for x in range(m):
            out[x] += w * s[i, x]
    return out_arr


def parity_split(samples):
    cdef double[:, ::1] s = np.ascontiguousarray(samples, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], m = s.shape[1], i, x
    even_arr = np.empty((n, m), dtype=np.float64)
    odd_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] even = even_arr
    cdef double[:, ::1] odd = odd_arr
    for i in range(n):
        for x in range(m):
            even[i, x] = 0.5 * (s[i, x] + s[n - 1 - i, x])
            odd[i, x] = 0.5 * (s[i, x] - s[n - 1 - i, x])
    return even_arr, odd_arr


def bilinear_contract(coeffs, a, b):
    cdef double[:, ::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = av.shape[1], i, j, x
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] row = np.empty(m, dtype=np.float64)
    cdef double cij
    for i in range(n):
        for x in range(m):
            row[x] = 0.0
        for j in range(n):
            cij = c[i, j]
            if cij != 0.0:
                for x in range(m):
                    row[x] += cij * bv[j, x]
        for x in range(m):
            out[x] += av[i, x] * row[x]
    return out_arr


def symop_accumulate(g0, v, g, t):
    cdef double complex[::1] g0v = np.ascontiguousarray(g0, dtype=np.complex128)
    cdef double complex[::1] vv = np.ascontiguousarray(v, dtype=np.complex128)
    cdef double complex[:, ::1] gv = np.ascontiguousarray(g, dtype=np.complex128)
    cdef double complex[:, ::1] tv = np.ascontiguousarray(t, dtype=np.complex128)
    cdef Py_ssize_t m = vv.shape[0], nk = gv.shape[0], k, x
    out_arr = np.empty(m, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double complex acc
    for x in range(m):
        acc = 0.0
        for k in range(nk):
            acc = acc + gv[k, x] * tv[k, x]
        out[x] = g0v[x] * vv[x] + 0.5 * acc
    return out_arr
