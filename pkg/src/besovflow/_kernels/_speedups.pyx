# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the pointwise hot loops.

Semantics match ``_fallback.py`` exactly; only the inner loops differ.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport pow, sqrt

cnp.import_array()


def magnitude_threshold_split(samples, double cut):
    """See _fallback.magnitude_threshold_split."""
    arr = np.ascontiguousarray(samples, dtype=np.float64)
    shape = arr.shape
    if shape[0] != 3:
        raise ValueError("expected a (3, ...) vector field")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] flat = arr.reshape(3, -1)
    cdef Py_ssize_t n = flat.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] low = np.zeros_like(flat)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] high = np.zeros_like(flat)
    cdef double cut2 = cut * cut
    cdef double a, b, c
    cdef Py_ssize_t i
    for i in range(n):
        a = flat[0, i]
        b = flat[1, i]
        c = flat[2, i]
        if a * a + b * b + c * c <= cut2:
            low[0, i] = a
            low[1, i] = b
            low[2, i] = c
        else:
            high[0, i] = a
            high[1, i] = b
            high[2, i] = c
    return low.reshape(shape), high.reshape(shape)


def lp_norm_pow(samples, double p):
    """See _fallback.lp_norm_pow."""
    arr = np.ascontiguousarray(samples, dtype=np.float64)
    if arr.shape[0] != 3:
        raise ValueError("expected a (3, ...) vector field")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] flat = arr.reshape(3, -1)
    cdef Py_ssize_t n = flat.shape[1]
    cdef double acc = 0.0
    cdef double m2
    cdef Py_ssize_t i
    if p == 2.0:
        for i in range(n):
            acc += (flat[0, i] * flat[0, i] + flat[1, i] * flat[1, i]
                    + flat[2, i] * flat[2, i])
        return acc
    cdef double half_p = 0.5 * p
    cdef int int_half = <int> half_p
    cdef double term
    cdef int e
    if half_p == int_half and 1 <= int_half <= 32:
        # integer powers of |f|^2 (p = 4, 8, 16, ...) by repeated squaring
        for i in range(n):
            m2 = (flat[0, i] * flat[0, i] + flat[1, i] * flat[1, i]
                  + flat[2, i] * flat[2, i])
            term = 1.0
            e = int_half
            while e > 0:
                if e & 1:
                    term *= m2
                m2 *= m2
                e >>= 1
            acc += term
        return acc
    for i in range(n):
        m2 = (flat[0, i] * flat[0, i] + flat[1, i] * flat[1, i]
              + flat[2, i] * flat[2, i])
        if m2 > 0.0:
            acc += pow(m2, half_p)
    return acc
