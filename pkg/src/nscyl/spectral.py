"""Grid, field containers and Fourier machinery on the periodic box [0, L) x [0, 1).

Layout conventions used everywhere in the package:

* physical arrays have shape ``(N1, N2)``; index ``(i, j)`` sits at
  ``(x1, x2) = (i * L / N1, j / N2)``.
* spectral arrays use the ``rfft2`` layout, shape ``(N1, N2 // 2 + 1)``:
  the first axis holds horizontal modes in FFT order, the second the
  non-negative vertical modes.
* the forward transform divides by ``N1 * N2`` so the ``(0, 0)`` coefficient
  is the grid mean and the ``k2 = 0`` column is the vertical average.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

THREADS_ENV = "NSCYL_THREADS"


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0, L) x [0, 1)."""

    L: float
    N1: int
    N2: int

    def __post_init__(self):
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"period L must be positive, got {self.L}")
        for name in ("N1", "N2"):
            n = getattr(self, name)
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N1", int(self.N1))
        object.__setattr__(self, "N2", int(self.N2))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N1, self.N2)

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.N1, self.N2 // 2 + 1)

    @property
    def dx1(self) -> float:
        return self.L / self.N1

    @property
    def dx2(self) -> float:
        return 1.0 / self.N2

    @cached_property
    def x1(self) -> np.ndarray:
        return np.arange(self.N1) * self.dx1

    @cached_property
    def x2(self) -> np.ndarray:
        return np.arange(self.N2) * self.dx2

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    @cached_property
    def index1(self) -> np.ndarray:
        """Integer horizontal mode numbers in FFT order (Nyquist as -N1/2)."""
        return np.fft.fftfreq(self.N1, d=1.0 / self.N1).astype(int)

    @cached_property
    def index2(self) -> np.ndarray:
        return np.arange(self.N2 // 2 + 1)

    @cached_property
    def k1(self) -> np.ndarray:
        """Horizontal wavenumbers 2*pi*k1/L, shape (N1, 1)."""
        return (2 * np.pi / self.L * self.index1)[:, None]

    @cached_property
    def k2(self) -> np.ndarray:
        """Vertical wavenumbers 2*pi*k2, shape (1, N2//2 + 1)."""
        return (2 * np.pi * self.index2)[None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        return self.k1**2 + self.k2**2

    @cached_property
    def ik1(self) -> np.ndarray:
        """Multiplier for d/dx1 with the unpaired Nyquist row zeroed."""
        k = self.k1.copy()
        k[self.N1 // 2] = 0.0
        return 1j * k

    @cached_property
    def ik2(self) -> np.ndarray:
        k = self.k2.copy()
        k[0, self.N2 // 2] = 0.0
        return 1j * k

    @cached_property
    def ik1_line(self) -> np.ndarray:
        """d/dx1 multiplier for 1D profiles in ``rfft`` layout."""
        k = 2 * np.pi / self.L * np.arange(self.N1 // 2 + 1)
        k[-1] = 0.0
        return 1j * k

    @cached_property
    def oscillating(self) -> np.ndarray:
        """Boolean mask of modes with k2 != 0."""
        mask = np.ones(self.spectral_shape, dtype=bool)
        mask[:, 0] = False
        return mask

    @cached_property
    def inv_neg_ksq(self) -> np.ndarray:
        """-1/|k|^2 on oscillating modes, 0 on the k2 = 0 column."""
        out = np.zeros(self.spectral_shape)
        out[:, 1:] = -1.0 / self.ksq[:, 1:]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep1 = np.abs(self.index1) <= self.N1 / 3
        keep2 = self.index2 <= self.N2 / 3
        return keep1[:, None] & keep2[None, :]

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        w = np.full(self.spectral_shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    # array-level transforms, used by the hot loops

    def fft(self, values: np.ndarray) -> np.ndarray:
        return sfft.rfft2(values, axes=(-2, -1), norm="forward", workers=_workers())

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.irfft2(coeffs, s=self.shape, axes=(-2, -1), norm="forward",
                           workers=_workers())

    def fft_line(self, profile: np.ndarray) -> np.ndarray:
        return sfft.rfft(profile, norm="forward", workers=_workers())

    def ifft_line(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.irfft(coeffs, n=self.N1, norm="forward", workers=_workers())

    def vertical_mean(self, values: np.ndarray) -> np.ndarray:
        return values.mean(axis=-1)


@dataclass(frozen=True, eq=False)
class RealField:
    """Real samples of a scalar field on ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real field, ``rfft2`` layout."""

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex)
        if coeffs.shape != self.grid.spectral_shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match "
                f"{self.grid.spectral_shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)


def transform(field: RealField) -> SpectralField:
    return SpectralField(field.grid, field.grid.fft(field.values))


def inverse_transform(field: SpectralField) -> RealField:
    return RealField(field.grid, field.grid.ifft(field.coefficients))


def derivative(field: SpectralField, axis: str) -> SpectralField:
    """Spectral derivative along ``"horizontal"`` (x1) or ``"vertical"`` (x2)."""
    grid = field.grid
    if axis == "horizontal":
        factor = grid.ik1
    elif axis == "vertical":
        factor = grid.ik2
    else:
        raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")
    return SpectralField(grid, factor * field.coefficients)


def dealias(field: SpectralField) -> SpectralField:
    """Zero every mode with |k1| > N1/3 or |k2| > N2/3."""
    return SpectralField(field.grid, field.coefficients * field.grid.dealias_mask)


def invert_laplacian_oscillating(field: SpectralField) -> SpectralField:
    """Solve Delta g = f on the k2 != 0 modes; the k2 = 0 column maps to zero."""
    return SpectralField(field.grid, field.coefficients * field.grid.inv_neg_ksq)


def spectral_energy(field: SpectralField) -> float:
    """Sum of |f_k|^2 over the full (Hermitian) lattice, equal to mean(f**2)."""
    c = field.coefficients
    return float(np.sum(field.grid.parseval_weights * np.abs(c) ** 2))


def line_derivative(grid: Grid, profile: np.ndarray) -> np.ndarray:
    """Spectral d/dx1 of a profile sampled on ``grid.x1``."""
    return grid.ifft_line(grid.ik1_line * grid.fft_line(profile))


def line_antiderivative(grid: Grid, profile: np.ndarray) -> np.ndarray:
    """G with G' = profile and G(0) = 0, exact for band-limited profiles.

    The mean contributes the secular part ``mean * x1``; the Nyquist mode is
    dropped, matching :func:`line_derivative`.
    """
    coeffs = grid.fft_line(profile)
    mean = coeffs[0].real
    ik = grid.ik1_line
    anti = np.zeros_like(coeffs)
    nz = ik != 0
    nz[0] = False
    anti[nz] = coeffs[nz] / ik[nz]
    G = grid.ifft_line(anti) + mean * grid.x1
    return G - G[0]


def window_indices(grid: Grid, a: float, b: float) -> tuple[int, int]:
    """Snap window endpoints to the nearest grid samples (indices into x1).

    Endpoints are unwrapped (not reduced mod N1); callers using them as array
    indices must reduce them.
    """
    if not a < b:
        raise ValueError(f"window needs a < b, got [{a}, {b}]")
    ia = int(np.rint(a / grid.dx1))
    ib = int(np.rint(b / grid.dx1))
    if ib <= ia:
        raise ValueError(f"window [{a}, {b}] collapses on the grid")
    if ib - ia > grid.N1:
        raise ValueError(f"window [{a}, {b}] is longer than the period")
    return ia, ib


def window_integral(grid: Grid, profile: np.ndarray, a: float, b: float) -> float:
    """Integral of a periodic profile over [a, b] with spectral accuracy."""
    ia, ib = window_indices(grid, a, b)
    G = line_antiderivative(grid, profile)
    total = float(np.mean(profile)) * grid.L

    def G_at(i: int) -> float:
        q, r = divmod(i, grid.N1)
        return G[r] + q * total

    return G_at(ib) - G_at(ia)
