"""Two-stage frequency-threshold splitting of critically-bounded fields.

A field g bounded in the critical space is decomposed as g = bar + tilde
where the bar piece lands in a subcritical Besov space (norm growing like
N^gamma1) and the tilde piece lands in L2 (norm decaying like N^-gamma2),
with both pieces uniformly bounded in the critical norm.  The construction
is a per-block pointwise magnitude cut at a threshold M(j, N) calibrated so
the certified bounds are independent of the block index, applied twice with
different exponent books, followed by Leray projection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from . import _kernels
from .fourier_calculus import leray_project
from .littlewood_paley import (
    BesovIndex,
    DyadicPartition,
    besov_norm_dyadic,
    block_range,
    block_symbol,
    critical_index,
    dyadic_block,
    modified_index,
)
from .spectral_core import (
    SpectralField,
    apply_multiplier,
    divergence_linf,
    l2_norm,
    to_physical,
)

LEDGER_TOL = 1e-12


class LedgerError(ValueError):
    """An exponent-book invariant failed, named in the message."""


class SplitIndexError(ValueError):
    """Invalid index set for the single-stage split."""


@dataclass(frozen=True)
class ExponentLedger:
    """Every exponent of the splitting construction for one value of p.

    Free choices (p0, alpha, p1) are resolved deterministically by
    derive_exponents; everything else is forced by the exponent relations
    and validated to 1e-12.
    """

    p: float
    p0: float
    alpha: float
    p1: float
    p2: float
    theta_inf: float
    theta_gen: float
    delta: float
    delta1: float
    delta2: float
    kappa: float
    beta_p: float
    gamma1: float
    gamma2: float
    kappa_prime: float
    beta: float

    @property
    def s_p(self) -> float:
        return critical_index(self.p)

    @property
    def s_p0(self) -> float:
        return critical_index(self.p0)

    @property
    def s_p1(self) -> float:
        return critical_index(self.p1)

    @property
    def s_p2(self) -> float:
        return critical_index(self.p2)

    @property
    def s_p_alpha(self) -> float:
        return modified_index(self.p, self.alpha)

    def validate(self, tol: float = LEDGER_TOL):
        """Assert every invariant; raises LedgerError naming the failure."""
        p, p0, p1, p2, a = self.p, self.p0, self.p1, self.p2, self.alpha

        def check(name, lhs, rhs=0.0):
            if abs(lhs - rhs) > tol:
                raise LedgerError(f"{name}: |{lhs!r} - {rhs!r}| > {tol}")

        def check_lt(name, lhs, rhs):
            if not lhs < rhs:
                raise LedgerError(f"{name}: {lhs!r} < {rhs!r} fails")

        check("integrability interpolation (stage 1)",
              (1 - self.theta_inf) / p0 + self.theta_inf / 2, 1 / p)
        check("delta from theta", self.delta,
              self.theta_inf / (2 * (1 - self.theta_inf)))
        check("regularity interpolation (stage 1)",
              (self.s_p0 + self.delta) * (1 - self.theta_inf), self.s_p)
        check_lt("alpha window (lower)", 3 * p / (p + 1), a)
        check_lt("alpha window (upper)", a, 3.0)
        check_lt("p window", p, a / (3 - a))
        check("theta_gen definition", self.theta_gen,
              (1 / p - 1 / p1) / (0.5 - 1 / p1))
        check_lt("theta_gen admissibility", 6 / a - 2, self.theta_gen)
        check("delta1 formula", self.delta1,
              (1 - 3 / a + self.theta_gen / 2) / (1 - self.theta_gen))
        check_lt("delta1 positivity", 0.0, self.delta1)
        check("regularity interpolation (stage 2)",
              (1 - self.theta_gen) * (self.s_p1 + self.delta1), self.s_p_alpha)
        check("p2 rule", p2, 2 * max(p0, p1))
        check("delta2 rule", self.delta2, min(self.delta, self.delta1) / 2)
        check("kappa formula", self.kappa,
              (p * self.beta_p + self.delta1 * p1 * (p0 - p) / (self.delta * p0))
              / (p1 - p))
        check("beta_p formula", self.beta_p, 3 * (p - 2) * (1 / a - 1 / 3))
        check_lt("delta below critical gap (p0)", self.delta, -self.s_p0)
        check_lt("delta1 below critical gap (p1)", self.delta1, -self.s_p1)
        check_lt("delta2 below critical gap (p2)", self.delta2, -self.s_p2)
        check("gamma1 formula", self.gamma1,
              self.delta2 * (p0 - p) / (self.delta * p0))
        check("gamma2 formula", self.gamma2,
              (self.kappa * (p - 2) + self.beta_p * p) / 2)
        check("kappa_prime midpoint", self.kappa_prime,
              self.delta2 / (4 * self.gamma1))
        check("beta rule", self.beta,
              min(2 * self.gamma2 * self.kappa_prime, 0.5))
        return self

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        d.update(s_p=self.s_p, s_p0=self.s_p0, s_p1=self.s_p1,
                 s_p2=self.s_p2, s_p_alpha=self.s_p_alpha)
        return d


def derive_exponents(p: float) -> ExponentLedger:
    """Resolve all exponents for a given p > 3.

    Deterministic free choices: p0 = 2p; alpha at the midpoint of its
    admissible window (3p/(p+1), 3); p1 the smallest of 2p, 4p, 8p, ...
    making theta_gen admissible with delta1 below the critical gap.
    """
    if not p > 3:
        raise LedgerError(f"splitting requires p > 3, got p={p}")
    p0 = 2.0 * p
    theta_inf = (1 / p - 1 / p0) / (0.5 - 1 / p0)
    delta = theta_inf / (2 * (1 - theta_inf))
    alpha = 0.5 * (3 * p / (p + 1) + 3.0)

    p1 = None
    theta_gen = delta1 = float("nan")
    cand = 2.0 * p
    for _ in range(60):
        th = (1 / p - 1 / cand) / (0.5 - 1 / cand)
        if th > 6 / alpha - 2:
            d1 = (1 - 3 / alpha + th / 2) / (1 - th)
            if 0 < d1 < -critical_index(cand):
                p1, theta_gen, delta1 = cand, th, d1
                break
        cand *= 2.0
    if p1 is None:
        raise LedgerError(f"no admissible p1 found in the dyadic sweep for p={p}")

    p2 = 2 * max(p0, p1)
    delta2 = min(delta, delta1) / 2
    beta_p = 3 * (p - 2) * (1 / alpha - 1 / 3)
    kappa = (p * beta_p + delta1 * p1 * (p0 - p) / (delta * p0)) / (p1 - p)
    gamma1 = delta2 * (p0 - p) / (delta * p0)
    gamma2 = (kappa * (p - 2) + beta_p * p) / 2
    kappa_prime = delta2 / (4 * gamma1)
    beta = min(2 * gamma2 * kappa_prime, 0.5)
    return ExponentLedger(
        p=p, p0=p0, alpha=alpha, p1=p1, p2=p2, theta_inf=theta_inf,
        theta_gen=theta_gen, delta=delta, delta1=delta1, delta2=delta2,
        kappa=kappa, beta_p=beta_p, gamma1=gamma1, gamma2=gamma2,
        kappa_prime=kappa_prime, beta=beta,
    ).validate()


def threshold_level(j: int, N: float, ledger: ExponentLedger) -> float:
    """Per-block cut level M(j, N) = N 2^{jE} for the first-stage split.

    E is calibrated so M(j,N)^{2-p} 2^{-p s_p j} = N^{2-p} independently of
    j — the L2 mass of the excess then aggregates without block imbalance.
    """
    E = ((ledger.p * ledger.s_p - ledger.p0 * (ledger.s_p0 + ledger.delta))
         / (ledger.p0 - ledger.p))
    return N * 2.0 ** (E * j)


# --- the generic per-block magnitude cut ----------------------------------

def _relocalizer(grid, j: int, part: DyadicPartition) -> np.ndarray:
    """Symbol of the neighborhood re-localization sum over |m - j| <= 1.

    Equals 1 on the support of block j's profile, so applying it to any
    pointwise-truncated part of a block and to the complementary excess
    reassembles the block exactly.
    """
    sym = part.phi(np.ldexp(grid.k_mag, -(j - 1))).copy()
    sym += part.phi(np.ldexp(grid.k_mag, -j))
    sym += part.phi(np.ldexp(grid.k_mag, -(j + 1)))
    return sym


def _threshold_split(g: SpectralField, levels, part: DyadicPartition
                     ) -> tuple[SpectralField, SpectralField]:
    """Cut every block of g at levels[j], re-localize, and sum.

    Returns (low, high) with low + high = g exactly; the mean mode (not
    covered by any annulus) is assigned to the low piece.
    """
    grid = g.grid
    low_acc = np.zeros_like(np.asarray(g.coeffs))
    for j in block_range(grid):
        fj = dyadic_block(g, j, part)
        samples = to_physical(fj, check=False)
        low, _ = _kernels.magnitude_threshold_split(samples, float(levels[j]))
        low_hat = grid.fftn(low)
        low_acc += _relocalizer(grid, j, part)[None] * low_hat
    low_acc[:, 0, 0, 0] = g.coeffs[:, 0, 0, 0]
    u1 = SpectralField(grid, low_acc)
    u2 = g - u1
    return u1, u2


def split_infinity(g: SpectralField, N: float, ledger: ExponentLedger,
                   part: DyadicPartition) -> tuple[SpectralField, SpectralField]:
    """First-stage split: subcritical piece + L2 piece, cut at M(j, N)."""
    if not N > 0:
        raise ValueError(f"threshold scale must be positive, got N={N}")
    levels = {j: threshold_level(j, N, ledger) for j in block_range(g.grid)}
    return _threshold_split(g, levels, part)


@dataclass(frozen=True)
class SplitIndices:
    """Index set (s0,p0), (s1,p1), (s2,p2) for the single-stage split."""

    s0: float
    p0: float
    s1: float
    p1: float
    s2: float
    p2: float

    def validate(self, tol: float = 1e-10):
        if not self.p2 < self.p0 < self.p1:
            raise SplitIndexError(
                f"integrability ordering p2 < p0 < p1 fails:"
                f" {self.p2}, {self.p0}, {self.p1}")
        theta = (1 / self.p0 - 1 / self.p1) / (1 / self.p2 - 1 / self.p1)
        if not 0 < theta < 1:
            raise SplitIndexError(
                f"integrability interpolation fails: theta={theta} not in (0,1)")
        s_interp = theta * self.s2 + (1 - theta) * self.s1
        if abs(s_interp - self.s0) > tol:
            raise SplitIndexError(
                f"regularity interpolation fails:"
                f" theta*s2+(1-theta)*s1 = {s_interp} != s0 = {self.s0}")
        for s, p, name in ((self.s0, self.p0, "s0"), (self.s1, self.p1, "s1"),
                           (self.s2, self.p2, "s2")):
            if not s < 3 / p:
                raise SplitIndexError(
                    f"Banach condition fails for {name}: {s} >= 3/{p}")
        return theta

    @property
    def cut_exponent(self) -> float:
        """E with M(j, eps) = eps 2^{jE}; makes both certified block
        bounds j-independent (the exponent cancellation is an identity)."""
        return (self.p0 * self.s0 - self.p1 * self.s1) / (self.p1 - self.p0)


def split_general(g: SpectralField, eps: float, indices: SplitIndices,
                  part: DyadicPartition) -> tuple[SpectralField, SpectralField]:
    """Single-stage split at scale eps for a general admissible index set.

    The low piece is certified in (s1, p1, p1), the excess in (s2, p2, p2),
    against the (s0, p0, p0) size of g.
    """
    if not eps > 0:
        raise ValueError(f"threshold scale must be positive, got eps={eps}")
    indices.validate()
    E = indices.cut_exponent
    levels = {j: eps * 2.0 ** (E * j) for j in block_range(g.grid)}
    return _threshold_split(g, levels, part)


# --- the composed two-stage split ------------------------------------------

@dataclass(frozen=True)
class SplitResult:
    bar_piece: SpectralField
    tilde_piece: SpectralField
    N: float
    ledger: ExponentLedger
    norm_table: dict


def stage2_indices(ledger: ExponentLedger) -> SplitIndices:
    return SplitIndices(
        s0=ledger.s_p_alpha, p0=ledger.p,
        s1=ledger.s_p1 + ledger.delta1, p1=ledger.p1,
        s2=0.0, p2=2.0,
    )


def compose_split(g: SpectralField, N: float, ledger: ExponentLedger,
                  part: DyadicPartition, div_tol: float = 1e-8) -> SplitResult:
    """Both stages plus Leray projection and the certified norm table.

    Stage 1 cuts at M(j, N); stage 2 re-splits the L2-bound piece at scale
    N^kappa with the general index set; the final pieces are
    bar = P(u1 + U1) and tilde = P(U2).
    """
    if divergence_linf(g) > div_tol * max(g.amplitude, 1e-300):
        raise ValueError("compose_split requires divergence-free input")
    u1, u2 = split_infinity(g, N, ledger, part)
    lam = N ** ledger.kappa
    U1, U2 = split_general(u2, lam, stage2_indices(ledger), part)
    bar = leray_project(u1 + U1, warn_mean=False)
    tilde = leray_project(U2, warn_mean=False)

    p, p2 = ledger.p, ledger.p2
    crit = BesovIndex(ledger.s_p, p, math.inf)
    sub = BesovIndex(ledger.s_p2 + ledger.delta2, p2, p2)
    recon = bar + tilde - g
    scale = max(l2_norm(g), 1e-300)
    norm_table = {
        "input_critical": besov_norm_dyadic(g, crit, part),
        "bar_subcritical": besov_norm_dyadic(bar, sub, part),
        "tilde_l2": l2_norm(tilde),
        "bar_critical": besov_norm_dyadic(bar, crit, part),
        "tilde_critical": besov_norm_dyadic(tilde, crit, part),
        "reconstruction_error": l2_norm(recon) / scale,
    }
    return SplitResult(bar, tilde, N, ledger, norm_table)


# --- weak* approximating sequence ------------------------------------------

def weakstar_approximants(g: SpectralField, k: int, part: DyadicPartition
                          ) -> SpectralField:
    """Band truncation to dyadic indices |j| <= k, then Leray projection.

    For k past the resolved range this returns (the projection of) g
    itself; small k keeps only the central annuli.
    """
    if k < 0:
        raise ValueError(f"truncation level must be nonnegative, got {k}")
    grid = g.grid
    acc = np.zeros_like(np.asarray(g.coeffs))
    for j in range(max(-k, grid.j_min), min(k, grid.j_max) + 1):
        acc += block_symbol(grid, j, part)[None] * g.coeffs
    return leray_project(SpectralField(grid, acc), warn_mean=False)
