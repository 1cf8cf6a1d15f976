"""Shared fixtures: grids, partitions, and seeded field corpora.

Grid sizes are chosen per suite: 8^3 for brute-force oracles, 16^3/32^3
for fast invariants, 64^3 only where a criterion pins the resolution.
"""
import math

import numpy as np
import pytest

from besovflow.besov_split import derive_exponents
from besovflow.littlewood_paley import build_partition
from besovflow.spectral_core import FrequencyGrid


@pytest.fixture(scope="session")
def grid8():
    return FrequencyGrid(points_per_axis=8)


@pytest.fixture(scope="session")
def grid16():
    return FrequencyGrid(points_per_axis=16)


@pytest.fixture(scope="session")
def grid32():
    return FrequencyGrid(points_per_axis=32)


@pytest.fixture(scope="session")
def grid64():
    return FrequencyGrid(points_per_axis=64)


@pytest.fixture(scope="session")
def part16(grid16):
    return build_partition(grid16)


@pytest.fixture(scope="session")
def part32(grid32):
    return build_partition(grid32)


@pytest.fixture(scope="session")
def part64(grid64):
    return build_partition(grid64)


@pytest.fixture(scope="session")
def ledger4():
    return derive_exponents(4.0)


def rng_field(grid, part, seed=0, norm=1.0):
    from besovflow.fields import random_divergence_free
    from besovflow.spectral_core import dealias

    return dealias(random_divergence_free(grid, part, seed=seed, norm=norm))
