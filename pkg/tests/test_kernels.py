"""Compiled kernels agree exactly with the pure-numpy fallback."""
import numpy as np
import pytest

from besovflow import _kernels
from besovflow._kernels import _fallback

try:
    from besovflow._kernels import _speedups
except ImportError:
    _speedups = None

needs_compiled = pytest.mark.skipif(_speedups is None,
                                    reason="compiled kernels not built")


def _sample(seed=0, n=24):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal((3, n, n, n))
    s[:, ::5, ::3, ::7] *= 25.0
    return s


def test_fallback_split_semantics():
    s = _sample(1)
    cut = 2.0
    low, high = _fallback.magnitude_threshold_split(s, cut)
    assert np.array_equal(low + high, s)
    mag = np.linalg.norm(s, axis=0)
    assert np.all(np.linalg.norm(low, axis=0) <= cut + 1e-12)
    assert np.all((np.linalg.norm(high, axis=0) == 0) | (mag > cut))
    # disjoint supports
    assert np.all((np.abs(low).sum(0) == 0) | (np.abs(high).sum(0) == 0))


def test_fallback_norm_semantics():
    s = _sample(2)
    acc = _fallback.lp_norm_pow(s, 4.0)
    mag2 = np.einsum("i...,i...->...", s, s)
    assert acc == pytest.approx(float((mag2 ** 2).sum()), rel=1e-12)
    assert _fallback.lp_norm_pow(s, 2.0) == pytest.approx(float(mag2.sum()),
                                                          rel=1e-12)


@needs_compiled
def test_compiled_matches_fallback_split():
    for seed in range(3):
        s = _sample(seed)
        cut = float(np.percentile(np.linalg.norm(s, axis=0), 90))
        lf, hf = _fallback.magnitude_threshold_split(s, cut)
        lc, hc = _speedups.magnitude_threshold_split(s, cut)
        assert np.array_equal(lf, lc)
        assert np.array_equal(hf, hc)


@needs_compiled
@pytest.mark.parametrize("p", [2.0, 4.0, 8.0, 16.0, 3.7])
def test_compiled_matches_fallback_norm(p):
    s = _sample(4)
    a = _fallback.lp_norm_pow(s, p)
    b = _speedups.lp_norm_pow(s, p)
    assert b == pytest.approx(a, rel=1e-12)


def test_dispatch_layer_exports():
    # the package-level dispatcher exposes the same callables
    assert hasattr(_kernels, "magnitude_threshold_split")
    assert hasattr(_kernels, "lp_norm_pow")
    s = _sample(5)
    low, high = _kernels.magnitude_threshold_split(s, 1.5)
    assert np.array_equal(low + high, s)


@needs_compiled
def test_vector_shape_required():
    bad = np.zeros((2, 4, 4, 4))
    with pytest.raises(ValueError):
        _speedups.magnitude_threshold_split(bad, 1.0)
    with pytest.raises(ValueError):
        _speedups.lp_norm_pow(bad, 4.0)
