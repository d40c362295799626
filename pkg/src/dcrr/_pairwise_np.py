"""NumPy fallback for the pairwise accumulation loops.

Row-blocked so that no n x n matrix is ever materialized; block partial sums
are combined with math.fsum to keep the loss accumulation compensated like
the compiled path.
"""

import math

import numpy as np
from scipy.special import ndtr

from .smoothing import EPANECHNIKOV

BACKEND = "python"

_BLOCK = 256
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _loss_values(a, h, kernel):
    # a = |z_i - z_j| / h, nonnegative
    if kernel == EPANECHNIKOV:
        inside = 0.375 + a * a * (0.75 - 0.125 * a * a)
        return h * np.where(a >= 1.0, a, inside)
    return h * (a * (2.0 * ndtr(a) - 1.0) + 2.0 * _INV_SQRT_2PI * np.exp(-0.5 * a * a))


def _dloss_values(a, h, kernel):
    if kernel == EPANECHNIKOV:
        return np.where(a >= 1.0, 1.0, 0.5 * a * (3.0 - a * a))
    return 2.0 * ndtr(a) - 1.0


def loss_sum(z, h, kernel):
    """Sum of L_h(z_i - z_j) over unordered pairs i < j."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    n = z.shape[0]
    cols = np.arange(n)
    parts = []
    for i0 in range(0, n, _BLOCK):
        i1 = min(i0 + _BLOCK, n)
        diff = z[i0:i1, None] - z[None, :]
        mask = cols[None, :] > np.arange(i0, i1)[:, None]
        vals = _loss_values(np.abs(diff) / h, h, kernel)
        parts.append(float(np.sum(vals, where=mask)))
    return math.fsum(parts)


def dloss_rowsums(z, h, kernel):
    """Vector a with a_i = sum_{j != i} L_h'(z_i - z_j)."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    n = z.shape[0]
    a = np.zeros(n)
    cols = np.arange(n)
    for i0 in range(0, n, _BLOCK):
        i1 = min(i0 + _BLOCK, n)
        diff = z[i0:i1, None] - z[None, :]
        mask = cols[None, :] > np.arange(i0, i1)[:, None]
        w = np.sign(diff) * _dloss_values(np.abs(diff) / h, h, kernel)
        w *= mask
        a[i0:i1] += w.sum(axis=1)
        a -= w.sum(axis=0)
    return a
