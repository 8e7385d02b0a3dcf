# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled consensus+innovations recursion over a batch of trials."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def run_batch(const cnp.int64_t[::1] ei, const cnp.int64_t[::1] ej,
              const cnp.uint8_t[:, :, ::1] online, const double[:, :, ::1] llr,
              const cnp.int64_t[::1] checkpoints):
    """Decision variables at ``checkpoints`` for every trial.

    ``online`` has shape ``(T, K, E)`` and ``llr`` shape ``(T, K, N)``; the
    result has shape ``(T, C, N)``. Arithmetic order matches the numpy
    fallback exactly.
    """
    cdef Py_ssize_t n_trials = llr.shape[0]
    cdef Py_ssize_t horizon = llr.shape[1]
    cdef Py_ssize_t n = llr.shape[2]
    cdef Py_ssize_t n_edges = ei.shape[0]
    cdef Py_ssize_t n_check = checkpoints.shape[0]
    out_arr = np.zeros((n_trials, n_check, n), dtype=np.float64)
    x_arr = np.zeros(n, dtype=np.float64)
    y_arr = np.zeros(n, dtype=np.float64)
    diag_arr = np.zeros(n, dtype=np.float64)
    w_arr = np.zeros(max(n_edges, 1), dtype=np.float64)
    deg_arr = np.zeros(n, dtype=np.int64)
    cdef double[:, :, ::1] out = out_arr
    cdef double[::1] x = x_arr
    cdef double[::1] y = y_arr
    cdef double[::1] diag = diag_arr
    cdef double[::1] w = w_arr
    cdef cnp.int64_t[::1] deg = deg_arr
    cdef Py_ssize_t t, k, e, i, c
    cdef cnp.int64_t a, b, dmax
    cdef double ca, cb
    with nogil:
        for t in range(n_trials):
            for i in range(n):
                x[i] = 0.0
            c = 0
            for k in range(horizon):
                ca = <double>k / <double>(k + 1)
                cb = 1.0 / <double>(k + 1)
                for i in range(n):
                    y[i] = ca * x[i] + cb * llr[t, k, i]
                    deg[i] = 0
                    diag[i] = 1.0
                for e in range(n_edges):
                    if online[t, k, e]:
                        deg[ei[e]] += 1
                        deg[ej[e]] += 1
                for e in range(n_edges):
                    if online[t, k, e]:
                        a = deg[ei[e]]
                        b = deg[ej[e]]
                        dmax = a if a > b else b
                        w[e] = 1.0 / (1.0 + <double>dmax)
                        diag[ei[e]] -= w[e]
                        diag[ej[e]] -= w[e]
                for i in range(n):
                    x[i] = diag[i] * y[i]
                for e in range(n_edges):
                    if online[t, k, e]:
                        x[ei[e]] += w[e] * y[ej[e]]
                        x[ej[e]] += w[e] * y[ei[e]]
                while c < n_check and checkpoints[c] == k + 1:
                    for i in range(n):
                        out[t, c, i] = x[i]
                    c += 1
    return out_arr
