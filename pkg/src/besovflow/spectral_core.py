"""Periodic-box spectral substrate: grids, fields, multipliers, products.

Fields live on a uniform periodic grid of side ``L`` with ``n`` points per
axis and are stored as full complex Fourier coefficient arrays with the
convention ``c = fftn(samples) / n**3`` so that a single mode m carries the
plane wave ``c(m) e^{i k_m . x}`` with ``k_m = (2*pi/L) m``.

Everything here is a pure function; fields are immutable after
construction (coefficient arrays are marked read-only).
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

SYMMETRY_TOL = 1e-10
DIVERGENCE_TOL = 1e-10


class GridMismatchError(ValueError):
    """Two fields from different grids were combined."""


class SymmetryError(ValueError):
    """Coefficients are not conjugate-symmetric (field not real)."""


class MultiplierError(ValueError):
    """A Fourier multiplier was non-finite on a resolved wavenumber."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform periodic grid, its wavenumber lattice, and the dyadic range.

    j_min/j_max bracket every dyadic annulus that meets a nonzero lattice
    wavenumber, so block sums over [j_min, j_max] telescope exactly on the
    resolved band.
    """

    box_length: float = 2 * np.pi
    points_per_axis: int = 64

    def __post_init__(self):
        n = self.points_per_axis
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"points_per_axis must be a power of two >= 8, got {n}")
        if self.box_length <= 0:
            raise ValueError("box_length must be positive")

    # --- lattice -----------------------------------------------------------
    @property
    def n(self) -> int:
        return self.points_per_axis

    @property
    def k0(self) -> float:
        """Smallest nonzero wavenumber magnitude, 2*pi/L."""
        return 2 * np.pi / self.box_length

    @functools.cached_property
    def modes_1d(self) -> np.ndarray:
        """Integer mode numbers along one axis in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @functools.cached_property
    def k_vectors(self) -> np.ndarray:
        """Wavenumber components, shape (3, n, n, n)."""
        m = self.modes_1d.astype(np.float64) * self.k0
        n = self.n
        k = np.empty((3, n, n, n))
        k[0] = m[:, None, None]
        k[1] = m[None, :, None]
        k[2] = m[None, None, :]
        return k

    @functools.cached_property
    def k_squared(self) -> np.ndarray:
        k = self.k_vectors
        return k[0] ** 2 + k[1] ** 2 + k[2] ** 2

    @functools.cached_property
    def k_mag(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @functools.cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep |m_i| < n/3 on every axis."""
        cut = self.n / 3.0
        keep1d = np.abs(self.modes_1d) < cut
        return (keep1d[:, None, None] & keep1d[None, :, None]
                & keep1d[None, None, :])

    @property
    def mode_cut(self) -> int:
        """Largest |m_i| surviving the 2/3 rule."""
        return int(np.max(np.abs(self.modes_1d[np.abs(self.modes_1d) < self.n / 3.0])))

    @functools.cached_property
    def x_vectors(self) -> np.ndarray:
        """Physical coordinates, shape (3, n, n, n)."""
        x1 = np.arange(self.n) * (self.box_length / self.n)
        n = self.n
        x = np.empty((3, n, n, n))
        x[0] = x1[:, None, None]
        x[1] = x1[None, :, None]
        x[2] = x1[None, None, :]
        return x

    @property
    def cell_volume(self) -> float:
        return (self.box_length / self.n) ** 3

    @property
    def volume(self) -> float:
        return self.box_length ** 3

    # --- dyadic range ------------------------------------------------------
    @property
    def j_min(self) -> int:
        """Lowest dyadic index whose annulus meets a nonzero lattice mode.

        The annulus profile for index j is supported on 3/4 < |k|/2^j < 8/3,
        so index j touches |k| iff log2(|k| 3/8) < j < log2(|k| 4/3).
        """
        return math.floor(math.log2(self.k0 * 3.0 / 8.0)) + 1

    @property
    def j_max(self) -> int:
        k_top = self.k0 * self.n / 2.0 * math.sqrt(3.0)
        return math.ceil(math.log2(k_top * 4.0 / 3.0)) - 1

    @property
    def j_interior(self) -> tuple[int, int]:
        """Sub-range of annuli wholly inside the dealiased band.

        2^j * 3/4 >= k0 and 2^j * 8/3 <= mode_cut * k0: blocks in this range
        see no band-edge truncation at all.
        """
        lo = math.ceil(math.log2(self.k0 * 4.0 / 3.0))
        hi = math.floor(math.log2(self.mode_cut * self.k0 * 3.0 / 8.0))
        return lo, hi

    # --- transforms --------------------------------------------------------
    def fftn(self, samples: np.ndarray) -> np.ndarray:
        return sfft.fftn(samples, axes=(-3, -2, -1)) / self.n ** 3

    def ifftn(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.ifftn(coeffs, axes=(-3, -2, -1)) * self.n ** 3

    def require_same(self, other: "FrequencyGrid"):
        if (self.box_length != other.box_length
                or self.points_per_axis != other.points_per_axis):
            raise GridMismatchError(
                f"grid mismatch: (L={self.box_length}, n={self.points_per_axis})"
                f" vs (L={other.box_length}, n={other.points_per_axis})")


def check_conjugate_symmetry(coeffs: np.ndarray, tol: float = SYMMETRY_TOL):
    """Raise SymmetryError (naming the worst mode) if c(-m) != conj(c(m))."""
    flipped = np.conj(coeffs[..., ::-1, ::-1, ::-1])
    flipped = np.roll(flipped, 1, axis=(-3, -2, -1))
    err = np.abs(coeffs - flipped)
    scale = max(float(np.max(np.abs(coeffs))), 1e-300)
    worst = float(np.max(err))
    if worst > tol * scale:
        idx = np.unravel_index(int(np.argmax(err)), err.shape)
        n = coeffs.shape[-1]
        mode = tuple(int(i if i < n // 2 else i - n) for i in idx[-3:])
        raise SymmetryError(
            f"conjugate symmetry violated: |c(m) - conj(c(-m))| = {worst:.3e}"
            f" (relative {worst / scale:.3e}) at mode m = {mode}")


@dataclass(frozen=True)
class SpectralField:
    """Three-component real vector field stored as Fourier coefficients."""

    grid: FrequencyGrid
    coeffs: np.ndarray  # (3, n, n, n) complex
    divergence_free: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        n = self.grid.n
        if c.shape != (3, n, n, n):
            raise ValueError(f"coeffs shape {c.shape} != (3, {n}, {n}, {n})")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def check(self, tol: float = SYMMETRY_TOL):
        check_conjugate_symmetry(self.coeffs, tol)
        if self.divergence_free:
            d = divergence_linf(self)
            if d > DIVERGENCE_TOL * max(self.amplitude, 1e-300):
                raise ValueError(f"divergence-free tag violated: |k.c| up to {d:.3e}")
        return self

    @property
    def amplitude(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self.grid.require_same(other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs,
                             self.divergence_free and other.divergence_free)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self.grid.require_same(other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs,
                             self.divergence_free and other.divergence_free)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar, self.divergence_free)

    __rmul__ = __mul__


@dataclass(frozen=True)
class ScalarSpectralField:
    """Real scalar field (e.g. pressure) as Fourier coefficients."""

    grid: FrequencyGrid
    coeffs: np.ndarray  # (n, n, n) complex

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        n = self.grid.n
        if c.shape != (n, n, n):
            raise ValueError(f"coeffs shape {c.shape} != ({n}, {n}, {n})")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True)
class TensorField:
    """Rank-2 tensor field (e.g. v (x) v) as Fourier coefficients."""

    grid: FrequencyGrid
    coeffs: np.ndarray  # (3, 3, n, n, n) complex

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        n = self.grid.n
        if c.shape != (3, 3, n, n, n):
            raise ValueError(f"coeffs shape {c.shape} != (3, 3, {n}, {n}, {n})")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)


# --- construction ----------------------------------------------------------

def to_spectral(samples: np.ndarray, grid: FrequencyGrid,
                divergence_free: bool = False) -> SpectralField:
    """Forward transform of real physical samples, shape (3, n, n, n)."""
    samples = np.asarray(samples, dtype=np.float64)
    return SpectralField(grid, grid.fftn(samples), divergence_free)


def to_physical(f: SpectralField, check: bool = True) -> np.ndarray:
    """Inverse transform to real samples; rejects non-real fields."""
    if check:
        check_conjugate_symmetry(f.coeffs)
    return np.real(f.grid.ifftn(f.coeffs))


def scalar_to_physical(f: ScalarSpectralField, check: bool = True) -> np.ndarray:
    if check:
        check_conjugate_symmetry(f.coeffs)
    return np.real(f.grid.ifftn(f.coeffs))


def zero_field(grid: FrequencyGrid) -> SpectralField:
    n = grid.n
    return SpectralField(grid, np.zeros((3, n, n, n), np.complex128), True)


# --- multipliers -----------------------------------------------------------

def apply_multiplier(f: SpectralField, m, divergence_free: bool | None = None
                     ) -> SpectralField:
    """Apply a Fourier multiplier.

    ``m`` is either an array (scalar symbol of shape (n,n,n) or matrix symbol
    of shape (3,3,n,n,n)) or a callable taking the grid and returning one.
    Non-finite symbol values are rejected with the offending wavenumber.
    """
    sym = m(f.grid) if callable(m) else np.asarray(m)
    bad = ~np.isfinite(sym)
    if bad.any():
        idx = np.unravel_index(int(np.argmax(bad)), sym.shape)
        n = f.grid.n
        mode = tuple(int(i if i < n // 2 else i - n) for i in idx[-3:])
        raise MultiplierError(f"multiplier non-finite at mode m = {mode}")
    if sym.ndim == 3:
        out = sym[None] * f.coeffs
    elif sym.ndim == 5:
        out = np.einsum("ij...,j...->i...", sym, f.coeffs)
    else:
        raise MultiplierError(f"multiplier rank {sym.ndim} unsupported")
    if divergence_free is None:
        divergence_free = f.divergence_free and sym.ndim == 3
    return SpectralField(f.grid, out, divergence_free)


def divergence_linf(f: SpectralField) -> float:
    """Max over modes of |k . c(k)|."""
    k = f.grid.k_vectors
    return float(np.max(np.abs(np.einsum("i...,i...->...", k, f.coeffs))))


def divergence(f: SpectralField) -> ScalarSpectralField:
    k = f.grid.k_vectors
    return ScalarSpectralField(f.grid, 1j * np.einsum("i...,i...->...", k, f.coeffs))


def gradient(f: ScalarSpectralField) -> SpectralField:
    k = f.grid.k_vectors
    return SpectralField(f.grid, 1j * k * f.coeffs[None])


def tensor_divergence(T: TensorField) -> SpectralField:
    """(div T)_i = d_j T_ij, spectrally i k_j T_ij."""
    k = T.grid.k_vectors
    return SpectralField(T.grid, 1j * np.einsum("j...,ij...->i...", k, T.coeffs))


# --- products --------------------------------------------------------------

def dealiased_product(f: SpectralField, g: SpectralField) -> TensorField:
    """Tensor product f (x) g in physical space, 2/3-rule truncated."""
    f.grid.require_same(g.grid)
    grid = f.grid
    fp = to_physical(f, check=False)
    gp = to_physical(g, check=False)
    prod = np.einsum("i...,j...->ij...", fp, gp)
    c = grid.fftn(prod)
    c *= grid.dealias_mask
    return TensorField(grid, c)


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask, f.divergence_free)


# --- norms -----------------------------------------------------------------

def lp_norm_samples(samples: np.ndarray, p: float, grid: FrequencyGrid) -> float:
    """L_p norm by trapezoidal quadrature of the pointwise magnitude.

    ``samples`` has shape (3, n, n, n) (vector, Euclidean magnitude) or
    (n, n, n) (scalar).  p = inf uses the grid max.
    """
    from . import _kernels

    samples = np.asarray(samples)
    if samples.ndim == 3:
        samples = samples[None]
    if samples.shape[0] == 1:
        mag = np.abs(samples[0])
        if np.isinf(p):
            return float(mag.max())
        return float((mag ** p).sum() * grid.cell_volume) ** (1.0 / p)
    if np.isinf(p):
        mag2 = np.einsum("i...,i...->...", samples, samples)
        return float(np.sqrt(mag2.max()))
    acc = _kernels.lp_norm_pow(samples, float(p))
    return float(acc * grid.cell_volume) ** (1.0 / p)


def lp_norm(f: SpectralField, p: float) -> float:
    if p == 2:
        return l2_norm(f)
    return lp_norm_samples(to_physical(f, check=False), p, f.grid)


def l2_norm(f: SpectralField) -> float:
    """L2 norm via Parseval (exact for the discrete quadrature)."""
    return float(np.sqrt(f.grid.volume * np.sum(np.abs(f.coeffs) ** 2)))


def h1_seminorm_sq(f: SpectralField) -> float:
    """Integral of |grad f|^2 via Parseval."""
    return float(f.grid.volume
                 * np.sum(f.grid.k_squared[None] * np.abs(f.coeffs) ** 2))


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    f.grid.require_same(g.grid)
    return float(np.real(f.grid.volume * np.sum(f.coeffs * np.conj(g.coeffs))))


# --- serialization ---------------------------------------------------------

_MAGIC = b"BESOVFLOW-FIELD-1\n"


def save_field(path, f: SpectralField):
    """Binary dump: magic, JSON header line, raw component-major coeffs."""
    header = {
        "box_length": f.grid.box_length,
        "points_per_axis": f.grid.points_per_axis,
        "components": 3,
        "divergence_free": bool(f.divergence_free),
        "dtype": "complex128",
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(f.coeffs).tobytes())


def load_field(path) -> SpectralField:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a field dump (bad magic)")
        header = json.loads(fh.readline().decode())
        grid = FrequencyGrid(header["box_length"], header["points_per_axis"])
        n = grid.n
        data = np.frombuffer(fh.read(), dtype=np.complex128)
    coeffs = data.reshape(3, n, n, n)
    return SpectralField(grid, coeffs, header.get("divergence_free", False))
