# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled state recursion and LLR accumulation (batch over trajectories)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def propagate(const double[:, ::1] A, const double[:, ::1] C, double[:, ::1] x,
              const double[:, :, ::1] w, const double[:, :, ::1] v,
              double[:, :, ::1] y):
    cdef Py_ssize_t B = x.shape[0], n = x.shape[1], K = w.shape[1], p = C.shape[0]
    cdef Py_ssize_t b, k, i, j
    cdef double acc
    cdef double[::1] xn = np.empty(n)
    with nogil:
        for b in range(B):
            for k in range(K):
                for i in range(p):
                    acc = v[b, k, i]
                    for j in range(n):
                        acc = acc + C[i, j] * x[b, j]
                    y[b, k, i] = acc
                for i in range(n):
                    acc = w[b, k, i]
                    for j in range(n):
                        acc = acc + A[i, j] * x[b, j]
                    xn[i] = acc
                for i in range(n):
                    x[b, i] = xn[i]


def accumulate_llr(const double[:, :, ::1] y, const double[:, ::1] diff, double log_det_ratio,
                   double[::1] total, double[:, ::1] path):
    cdef Py_ssize_t B = y.shape[0], K = y.shape[1], p = y.shape[2]
    cdef Py_ssize_t b, k, i, j
    cdef double q, row, t
    with nogil:
        for b in range(B):
            t = total[b]
            for k in range(K):
                q = 0.0
                for i in range(p):
                    row = 0.0
                    for j in range(p):
                        row = row + diff[i, j] * y[b, k, j]
                    q = q + y[b, k, i] * row
                t = t + 0.5 * (log_det_ratio + q)
                path[b, k] = t
            total[b] = t
