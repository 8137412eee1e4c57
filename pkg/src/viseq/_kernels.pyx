# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Must stay numerically identical to ``_kernels_py``."""
import numpy as np

from libc.math cimport exp, log, log1p
from libc.stdint cimport int64_t


cdef Py_ssize_t _binomial_inverse(double u, Py_ssize_t n, double p) noexcept nogil:
    cdef bint flip
    cdef double q, logr, logpmf, cdf
    cdef Py_ssize_t k
    if p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    flip = p > 0.5
    q = 1.0 - p if flip else p
    logr = log(q) - log1p(-q)
    logpmf = n * log1p(-q)
    cdf = exp(logpmf)
    k = 0
    while u >= cdf and k < n:
        logpmf = logpmf + ((log(<double>(n - k)) - log(<double>(k + 1))) + logr)
        k += 1
        cdf = cdf + exp(logpmf)
    return n - k if flip else k


def binomial_inverse(double u, Py_ssize_t n, double p):
    return _binomial_inverse(u, n, p)


def robbins_monro_table(uniforms, table, Py_ssize_t trials, double p0, double a0, double t0):
    cdef const double[::1] us = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const double[::1] tab = np.ascontiguousarray(table, dtype=np.float64)
    if tab.shape[0] != trials + 1:
        raise ValueError("table must have trials + 1 entries")
    out_arr = np.empty(us.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double p = p0, a
    cdef Py_ssize_t t, k
    with nogil:
        for t in range(us.shape[0]):
            a = a0 / ((t + 1) + t0)
            k = _binomial_inverse(us[t], trials, p)
            p = p + a * (tab[k] - p)
            if p < 0.0:
                p = 0.0
            elif p > 1.0:
                p = 1.0
            out[t] = p
    return out_arr


def resample_means(values, idx):
    cdef const double[::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef const int64_t[:, ::1] ix = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t rows = ix.shape[0], cols = ix.shape[1], i, j
    out_arr = np.empty(rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double s
    with nogil:
        for i in range(rows):
            s = 0.0
            for j in range(cols):
                s = s + vals[ix[i, j]]
            out[i] = s / cols
    return out_arr
