"""Heat semigroup, Leray projection, and Riesz pressure calculus."""
import math

import numpy as np
import pytest

from besovflow.fields import random_divergence_free, single_mode, taylor_green
from besovflow.fourier_calculus import (
    dyadic_times,
    heat_semigroup,
    leray_project,
    pressure_of_tensor,
    riesz_pressure,
    semigroup_derivative_bound_check,
)
from besovflow.littlewood_paley import BesovIndex, besov_norm_dyadic
from besovflow.spectral_core import (
    dealiased_product,
    divergence_linf,
    gradient,
    l2_norm,
    scalar_to_physical,
    to_spectral,
)


def test_semigroup_law(grid32):
    rng = np.random.default_rng(0)
    n = grid32.n
    f = to_spectral(rng.standard_normal((3, n, n, n)), grid32)
    a = heat_semigroup(heat_semigroup(f, 0.1), 0.25)
    b = heat_semigroup(f, 0.35)
    assert np.abs(a.coeffs - b.coeffs).max() < 1e-14 * np.abs(f.coeffs).max()
    z = heat_semigroup(f, 0.0)
    assert np.array_equal(z.coeffs, f.coeffs)


def test_single_mode_decay_exact(grid32):
    f = single_mode(grid32, m=(0, 3, 0), component=0)
    t = 0.2
    g = heat_semigroup(f, t)
    assert l2_norm(g) == pytest.approx(math.exp(-9 * t) * l2_norm(f),
                                       rel=1e-13)


def test_leray_projection(grid32, part32):
    rng = np.random.default_rng(1)
    n = grid32.n
    s = rng.standard_normal((3, n, n, n))
    s -= s.mean(axis=(1, 2, 3), keepdims=True)
    f = to_spectral(s, grid32)
    pf = leray_project(f)
    assert divergence_linf(pf) < 1e-10 * max(pf.amplitude, 1e-300)
    ppf = leray_project(pf)
    assert np.abs(ppf.coeffs - pf.coeffs).max() < 1e-13 * pf.amplitude
    # gradients are annihilated (mean-zero scalar potential)
    from besovflow.spectral_core import ScalarSpectralField

    q = ScalarSpectralField(grid32, np.asarray(f.coeffs[0]))
    gq = gradient(q)
    assert l2_norm(leray_project(gq, warn_mean=False)) < 1e-12 * l2_norm(gq)


def test_riesz_pressure_taylor_green(grid32):
    tg = taylor_green(grid32)
    x = grid32.x_vectors
    exact = -(np.cos(2 * x[0]) + np.cos(2 * x[1])) / 4
    got = scalar_to_physical(riesz_pressure(tg, tg))
    assert np.abs(got - exact).max() < 1e-12


def test_pressure_of_tensor_consistency(grid32):
    u = taylor_green(grid32)
    p1 = riesz_pressure(u, u)
    p2 = pressure_of_tensor(dealiased_product(u, u))
    assert np.abs(p1.coeffs - p2.coeffs).max() < 1e-13


def test_pressure_compatibility(grid32):
    """Laplace p = -div div (u (x) u), i.e. |k|^2 p = -k_i k_j T_ij."""
    u = taylor_green(grid32)
    p = riesz_pressure(u, u)
    T = dealiased_product(u, u)
    k = grid32.k_vectors
    kkT = np.einsum("i...,j...,ij...->...", k, k, T.coeffs)
    lhs = grid32.k_squared * p.coeffs
    assert np.abs(lhs + kkT).max() < 1e-12 * max(np.abs(kkT).max(), 1e-300)


def test_dyadic_times(grid32):
    ts = dyadic_times(grid32)
    assert np.all(ts > 0)
    assert np.all(np.diff(ts) > 0)
    ratios = ts[1:] / ts[:-1]
    assert np.allclose(ratios, ratios[0])


def test_semigroup_derivative_bound(grid32, part32):
    f = random_divergence_free(grid32, part32, seed=3)
    ref = besov_norm_dyadic(f, BesovIndex(-0.25, 4.0, math.inf), part32)
    ts = dyadic_times(grid32)
    rep = semigroup_derivative_bound_check(f, 0, 1, 4.0, ts, ref)
    assert math.isfinite(rep.worst_ratio)
    assert rep.worst_ratio > 0
    assert rep.worst_t in ts
    assert rep.reference_norm == ref
