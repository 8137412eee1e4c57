"""Pure-Python kernels. Arithmetic mirrors ``_kernels.pyx`` operation by operation."""
from math import exp, log, log1p

import numpy as np


def binomial_inverse(u, n, p):
    """Draw K ~ Binomial(n, p) from one uniform by inverting the CDF.

    For p > 1/2 the inversion runs on the mirrored distribution and returns
    ``n - k``, which keeps the pmf recursion short.
    """
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
        logpmf = logpmf + ((log(n - k) - log(k + 1)) + logr)
        k += 1
        cdf = cdf + exp(logpmf)
    return n - k if flip else k


def robbins_monro_table(uniforms, table, trials, p0, a0, t0):
    """Stochastic approximation on a map whose noisy value is ``table[K]``,
    ``K ~ Binomial(trials, p)``. Returns every iterate."""
    us = np.asarray(uniforms, dtype=np.float64).tolist()
    tab = np.asarray(table, dtype=np.float64).tolist()
    out = np.empty(len(us), dtype=np.float64)
    p = float(p0)
    for t, u in enumerate(us):
        a = a0 / ((t + 1) + t0)
        k = binomial_inverse(u, trials, p)
        p = p + a * (tab[k] - p)
        if p < 0.0:
            p = 0.0
        elif p > 1.0:
            p = 1.0
        out[t] = p
    return out


def resample_means(values, idx):
    """Row means of ``values[idx]`` for a 2-D index matrix, summed left to right."""
    vals = np.asarray(values, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.int64)
    sums = np.zeros(idx.shape[0], dtype=np.float64)
    for j in range(idx.shape[1]):
        sums += vals[idx[:, j]]
    return sums / idx.shape[1]
