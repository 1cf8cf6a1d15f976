"""Dyadic partition of unity: telescoping, support, almost-orthogonality."""
import math

import numpy as np
import pytest

from besovflow.littlewood_paley import (
    ANNULUS_HI,
    ANNULUS_LO,
    BlockRangeError,
    block_range,
    block_symbol,
    build_partition,
    dyadic_block,
    low_pass,
    profile_kernel_l1,
)
from besovflow.spectral_core import l2_norm, to_spectral


def test_telescoping_identity(grid64, part64):
    tot = np.zeros_like(grid64.k_mag)
    for j in block_range(grid64):
        tot += block_symbol(grid64, j, part64)
    err = np.abs(tot[grid64.k_mag > 0] - 1).max()
    assert err < 1e-12
    # the mean mode is never touched by any annulus
    assert tot[grid64.k_mag == 0].max() == 0.0


def test_block_symbol_support(grid64, part64):
    for j in (-1, 0, 2, 4):
        sym = block_symbol(grid64, j, part64)
        ratio = grid64.k_mag / 2.0 ** j
        outside = (ratio <= ANNULUS_LO) | (ratio >= ANNULUS_HI)
        assert np.abs(sym[outside]).max() == 0.0
        assert sym.max() <= 1.0 + 1e-12


def test_almost_orthogonality(grid32, part32):
    rng = np.random.default_rng(0)
    n = grid32.n
    f = to_spectral(rng.standard_normal((3, n, n, n)), grid32)
    scale = l2_norm(f)
    js = list(block_range(grid32))
    for i in js:
        fi = dyadic_block(f, i, part32)
        for j in js:
            if abs(i - j) >= 2:
                assert l2_norm(dyadic_block(fi, j, part32)) < 1e-12 * scale


def test_low_pass_plus_blocks_is_identity(grid32, part32):
    rng = np.random.default_rng(1)
    n = grid32.n
    f = to_spectral(rng.standard_normal((3, n, n, n)), grid32)
    # chi(2^{-j0} .) collects every annulus below j0, so adding the blocks
    # at j >= j0 restores the identity
    j0 = 1
    acc = np.asarray(low_pass(f, j0, part32).coeffs).copy()
    for j in block_range(grid32):
        if j >= j0:
            acc = acc + dyadic_block(f, j, part32).coeffs
    assert np.abs(acc - f.coeffs).max() < 1e-12 * np.abs(f.coeffs).max()


def test_block_range_matches_grid(grid64):
    r = block_range(grid64)
    assert r[0] == grid64.j_min
    assert r[-1] == grid64.j_max
    assert grid64.j_min <= -1 <= 6 <= grid64.j_max


def test_block_range_error(grid32, part32):
    rng = np.random.default_rng(2)
    n = grid32.n
    f = to_spectral(rng.standard_normal((3, n, n, n)), grid32)
    with pytest.raises(BlockRangeError):
        dyadic_block(f, grid32.j_max + 5, part32)


def test_profile_kernel_l1_finite(part64):
    v = profile_kernel_l1(part64)
    assert math.isfinite(v)
    assert 0 < v < 100
    # refining the quadrature grid on the same box barely moves the value
    v2 = profile_kernel_l1(part64, n=256, box=40.0)
    assert abs(v - v2) < 0.1 * v


def test_partition_grid_independent(grid16, grid32, part16, part32):
    # same profile evaluated on both grids: values agree on shared modes
    s16 = block_symbol(grid16, 1, part16)
    s32 = block_symbol(grid32, 1, part32)
    assert s16[3, 0, 0] == pytest.approx(s32[3, 0, 0], rel=1e-14)
    assert s16[0, 2, 0] == pytest.approx(s32[0, 2, 0], rel=1e-14)


def test_smoothness_parameter():
    grid = None
    from besovflow.spectral_core import FrequencyGrid

    grid = FrequencyGrid(points_per_axis=16)
    sharp = build_partition(grid, smoothness=0.5)
    soft = build_partition(grid, smoothness=2.0)
    tot_sharp = sum(block_symbol(grid, j, sharp) for j in block_range(grid))
    tot_soft = sum(block_symbol(grid, j, soft) for j in block_range(grid))
    for tot in (tot_sharp, tot_soft):
        assert np.abs(tot[grid.k_mag > 0] - 1).max() < 1e-12
