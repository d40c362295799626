# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise accumulation loops.

Given per-row residuals z_i = y_i - x_i @ beta, every pairwise quantity of
the rank loss depends on the scalar differences z_i - z_j only, so the O(n^2)
inner loops run over a single vector.  The loss sum is Neumaier-compensated:
it accumulates up to N(N-1)/2 terms of similar magnitude.  The kernel branch
is hoisted out of the pair loops.
"""

from libc.math cimport erfc, exp, fabs

import numpy as np

cdef double INV_SQRT_2PI = 0.3989422804014326779
cdef double INV_SQRT_2 = 0.7071067811865475244

cdef int GAUSSIAN = 0
cdef int EPANECHNIKOV = 1

BACKEND = "compiled"


cdef inline double _loss_gauss(double a) nogil:
    # a >= 0; unit-bandwidth smoothed |.|: a*(2*Phi(a)-1) + 2*phi(a)
    return a * (1.0 - erfc(a * INV_SQRT_2)) + 2.0 * INV_SQRT_2PI * exp(-0.5 * a * a)


cdef inline double _loss_epan(double a) nogil:
    if a >= 1.0:
        return a
    return 0.375 + a * a * (0.75 - 0.125 * a * a)


cdef inline double _dloss_gauss(double a) nogil:
    return 1.0 - erfc(a * INV_SQRT_2)


cdef inline double _dloss_epan(double a) nogil:
    if a >= 1.0:
        return 1.0
    return 0.5 * a * (3.0 - a * a)


def loss_sum(const double[::1] z, double h, int kernel):
    """Sum of L_h(z_i - z_j) over unordered pairs i < j."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t i, j
    cdef double zi, term
    cdef double inv_h = 1.0 / h
    cdef double total = 0.0, comp = 0.0, t
    with nogil:
        if kernel == EPANECHNIKOV:
            for i in range(n - 1):
                zi = z[i]
                for j in range(i + 1, n):
                    term = h * _loss_epan(fabs(zi - z[j]) * inv_h)
                    t = total + term
                    if fabs(total) >= fabs(term):
                        comp += (total - t) + term
                    else:
                        comp += (term - t) + total
                    total = t
        else:
            for i in range(n - 1):
                zi = z[i]
                for j in range(i + 1, n):
                    term = h * _loss_gauss(fabs(zi - z[j]) * inv_h)
                    t = total + term
                    if fabs(total) >= fabs(term):
                        comp += (total - t) + term
                    else:
                        comp += (term - t) + total
                    total = t
    return total + comp


def dloss_rowsums(const double[::1] z, double h, int kernel):
    """Vector a with a_i = sum_{j != i} L_h'(z_i - z_j)."""
    cdef Py_ssize_t n = z.shape[0]
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] a = out
    cdef Py_ssize_t i, j
    cdef double zi, d, w, ai
    cdef double inv_h = 1.0 / h
    with nogil:
        if kernel == EPANECHNIKOV:
            for i in range(n - 1):
                zi = z[i]
                ai = a[i]
                for j in range(i + 1, n):
                    d = zi - z[j]
                    w = _dloss_epan(fabs(d) * inv_h)
                    if d < 0.0:
                        w = -w
                    elif d == 0.0:
                        w = 0.0
                    ai += w
                    a[j] -= w
                a[i] = ai
        else:
            for i in range(n - 1):
                zi = z[i]
                ai = a[i]
                for j in range(i + 1, n):
                    d = zi - z[j]
                    w = _dloss_gauss(fabs(d) * inv_h)
                    if d < 0.0:
                        w = -w
                    elif d == 0.0:
                        w = 0.0
                    ai += w
                    a[j] -= w
                a[i] = ai
    return out
