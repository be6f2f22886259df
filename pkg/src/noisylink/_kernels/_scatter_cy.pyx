# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scatter kernels for weighted sparse aggregation.

These are the inner loops executed once (forward) or twice (backward)
per encoder layer per training step; everything else in the package is
vectorized numpy.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def spmm_forward(cnp.int64_t[::1] rows,
                 cnp.int64_t[::1] cols,
                 cnp.float64_t[::1] weights,
                 cnp.float64_t[:, ::1] x,
                 cnp.float64_t[:, ::1] out):
    """out[rows[e]] += weights[e] * x[cols[e]] for every edge e."""
    cdef Py_ssize_t e, k, i, j
    cdef Py_ssize_t n_edges = rows.shape[0]
    cdef Py_ssize_t dim = x.shape[1]
    cdef double w
    for e in range(n_edges):
        i = rows[e]
        j = cols[e]
        w = weights[e]
        for k in range(dim):
            out[i, k] += w * x[j, k]


def spmm_backward_x(cnp.int64_t[::1] rows,
                    cnp.int64_t[::1] cols,
                    cnp.float64_t[::1] weights,
                    cnp.float64_t[:, ::1] grad_out,
                    cnp.float64_t[:, ::1] grad_x):
    """grad_x[cols[e]] += weights[e] * grad_out[rows[e]]."""
    cdef Py_ssize_t e, k, i, j
    cdef Py_ssize_t n_edges = rows.shape[0]
    cdef Py_ssize_t dim = grad_out.shape[1]
    cdef double w
    for e in range(n_edges):
        i = rows[e]
        j = cols[e]
        w = weights[e]
        for k in range(dim):
            grad_x[j, k] += w * grad_out[i, k]


def spmm_backward_weights(cnp.int64_t[::1] rows,
                          cnp.int64_t[::1] cols,
                          cnp.float64_t[:, ::1] x,
                          cnp.float64_t[:, ::1] grad_out,
                          cnp.float64_t[::1] grad_w):
    """grad_w[e] = <grad_out[rows[e]], x[cols[e]]>."""
    cdef Py_ssize_t e, k, i, j
    cdef Py_ssize_t n_edges = rows.shape[0]
    cdef Py_ssize_t dim = x.shape[1]
    cdef double acc
    for e in range(n_edges):
        i = rows[e]
        j = cols[e]
        acc = 0.0
        for k in range(dim):
            acc += grad_out[i, k] * x[j, k]
        grad_w[e] = acc
