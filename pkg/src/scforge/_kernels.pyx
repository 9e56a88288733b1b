# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot loops in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def goursat_march(M, a, b, double hu, double hv):
    cdef const double[:, ::1] m = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t nu = m.shape[0], nv = m.shape[1]
    out = np.zeros((nu, nv))
    cdef double[:, ::1] phi = out
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t i, j, s, lo, hi
    cdef double k = 0.25 * hu * hv
    cdef double west, south, sw, rhs
    for i in range(nu):
        phi[i, 0] = av[i]
    for j in range(nv):
        phi[0, j] = bv[j]
    for s in range(2, nu + nv - 1):
        lo = s - nv + 1
        if lo < 1:
            lo = 1
        hi = s - 1
        if hi > nu - 1:
            hi = nu - 1
        for i in range(lo, hi + 1):
            j = s - i
            west = phi[i - 1, j]
            south = phi[i, j - 1]
            sw = phi[i - 1, j - 1]
            rhs = south + west - sw - k * (m[i - 1, j - 1] * sw + m[i, j - 1] * south
                                           + m[i - 1, j] * west)
            phi[i, j] = rhs / (1.0 + k * m[i, j])
    return out


def cumquad4(f, double h):
    arr = np.asarray(f, dtype=np.float64)
    shape = arr.shape
    cdef const double[:, ::1] x = np.ascontiguousarray(arr.reshape(shape[0], -1))
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], i, q
    res = np.zeros((n, c))
    cdef double[:, ::1] out = res
    cdef double w = h / 24.0
    cdef double inc
    for q in range(c):
        for i in range(n - 1):
            if i == 0:
                inc = (9.0 * x[0, q] + 19.0 * x[1, q] - 5.0 * x[2, q] + x[3, q]) * w
            elif i == n - 2:
                inc = (9.0 * x[n - 1, q] + 19.0 * x[n - 2, q] - 5.0 * x[n - 3, q]
                       + x[n - 4, q]) * w
            else:
                inc = (-x[i - 1, q] + 13.0 * x[i, q] + 13.0 * x[i + 1, q] - x[i + 2, q]) * w
            out[i + 1, q] = out[i, q] + inc
    return res.reshape(shape)
