"""Pure-numpy implementations of the kernels in ``_speedups.pyx``.

These are the reference implementations; the Cython versions must agree
with them to rounding error (see tests/test_kernels.py).
"""
import numpy as np


def magnitude_threshold_split(samples, cut):
    """Split a vector field into small and large parts by pointwise magnitude.

    ``samples`` has shape (3, ...); the Euclidean magnitude over the first
    axis is compared against ``cut``.  Points with |f(x)| <= cut go to the
    first output, the rest to the second; the two outputs sum to ``samples``.
    """
    samples = np.asarray(samples)
    mag2 = np.einsum("i...,i...->...", samples, samples)
    small = mag2 <= cut * cut
    low = np.where(small[None], samples, 0.0)
    return low, samples - low


def lp_norm_pow(samples, p):
    """Sum of |f(x)|^p over grid points for a (3, ...) vector field.

    The caller multiplies by the cell volume and takes the p-th root.
    """
    samples = np.asarray(samples)
    mag2 = np.einsum("i...,i...->...", samples, samples)
    if p == 2.0:
        return float(mag2.sum())
    return float((mag2 ** (p / 2.0)).sum())
