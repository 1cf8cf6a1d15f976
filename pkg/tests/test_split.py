"""Two-stage frequency-threshold splitting: exactness and monotonicity."""
import math

import numpy as np
import pytest

from besovflow.besov_split import (
    SplitIndexError,
    SplitIndices,
    compose_split,
    derive_exponents,
    split_general,
    split_infinity,
    stage2_indices,
    weakstar_approximants,
)
from besovflow.fields import random_divergence_free, random_heavy_tailed
from besovflow.littlewood_paley import BesovIndex, besov_norm_dyadic
from besovflow.spectral_core import divergence_linf, l2_norm


NORM_KEYS = {"input_critical", "bar_subcritical", "tilde_l2", "bar_critical",
             "tilde_critical", "reconstruction_error"}


def test_split_infinity_reconstructs(grid32, part32, ledger4):
    g = random_heavy_tailed(grid32, part32, seed=0)
    low, high = split_infinity(g, 2.0, ledger4, part32)
    err = l2_norm((low + high) - g)
    assert err < 1e-10 * l2_norm(g)


def test_compose_split_exact_and_divergence_free(grid32, part32, ledger4):
    for seed in range(3):
        g = random_heavy_tailed(grid32, part32, seed=seed)
        res = compose_split(g, 4.0, ledger4, part32)
        assert set(res.norm_table) >= NORM_KEYS
        assert res.norm_table["reconstruction_error"] < 1e-10
        amp = max(g.amplitude, 1e-300)
        assert divergence_linf(res.bar_piece) < 1e-10 * amp
        assert divergence_linf(res.tilde_piece) < 1e-10 * amp


def test_tilde_vanishes_for_huge_threshold(grid32, part32, ledger4):
    g = random_divergence_free(grid32, part32, seed=1)
    res = compose_split(g, 1e6, ledger4, part32)
    assert res.norm_table["tilde_l2"] < 1e-12
    # and the bar piece is then just the Leray projection of g itself
    diff = l2_norm(res.bar_piece - g)
    assert diff < 1e-10 * l2_norm(g)


def test_tilde_l2_monotone_in_threshold(grid32, part32, ledger4):
    g = random_heavy_tailed(grid32, part32, seed=2, norm=4.0)
    vals = [compose_split(g, N, ledger4, part32).norm_table["tilde_l2"]
            for N in (0.25, 1.0, 4.0, 16.0)]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_split_general_matches_indices(grid32, part32, ledger4):
    g = random_heavy_tailed(grid32, part32, seed=3)
    idx = stage2_indices(ledger4)
    low, high = split_general(g, 0.5, idx, part32)
    err = l2_norm((low + high) - g)
    assert err < 1e-10 * l2_norm(g)


def test_split_index_errors():
    with pytest.raises(SplitIndexError):
        SplitIndices(s0=0.0, p0=4.0, s1=0.0, p1=3.0, s2=0.0, p2=2.0).validate()
    with pytest.raises(SplitIndexError):
        # regularity interpolation broken
        SplitIndices(s0=1.0, p0=4.0, s1=0.0, p1=8.0, s2=0.0, p2=2.0).validate()
    with pytest.raises(SplitIndexError):
        # Banach condition s < 3/p broken for the middle index
        SplitIndices(s0=2.0, p0=4.0, s1=2.0, p1=8.0, s2=2.0, p2=2.0).validate()


def test_weakstar_approximants_converge(grid32, part32):
    from besovflow.fourier_calculus import leray_project

    g = random_divergence_free(grid32, part32, seed=4)
    full = leray_project(g)
    errs = [l2_norm(weakstar_approximants(g, k, part32) - full)
            for k in (0, 1, 2, 4, 8)]
    assert all(a >= b - 1e-14 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-12 * l2_norm(g)
    with pytest.raises(ValueError):
        weakstar_approximants(g, -1, part32)


def test_bar_subcritical_finite_and_scaling(grid32, part32, ledger4):
    g = random_divergence_free(grid32, part32, seed=5)
    res = compose_split(g, 4.0, ledger4, part32)
    t = res.norm_table
    assert all(math.isfinite(v) for v in t.values())
    assert t["input_critical"] == pytest.approx(1.0, rel=1e-6)
    assert t["bar_critical"] >= 0 and t["tilde_critical"] >= 0
