"""Uniform periodic grids, multichannel real fields, and spectral helpers.

Conventions used throughout the package:

* Fields are stored as float64 arrays of shape ``(channels, *spatial)`` with
  spatial axes in C order.
* Spectra use the real-to-complex half-spectrum layout of ``numpy.fft.rfftn``:
  the last spatial axis keeps modes ``0..n/2`` only, earlier axes keep the
  full set with the standard negative-frequency wrap.
* The forward transform is unnormalized; the inverse divides by the number of
  grid points (numpy's default pair).
* Mode ``j`` on an axis of length ``l`` carries wavenumber ``2*pi*j/l``.
* Quadratic products are dealiased by padding to 3/2 resolution, multiplying
  pointwise, transforming back, and keeping only modes below two thirds of
  the Nyquist index.  Nyquist rows are zeroed after any nonlinear product.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "Spectrum",
    "forward_transform",
    "inverse_transform",
    "wavenumbers",
    "squared_wavenumbers",
    "dealias_two_thirds_pad",
    "spectral_resample",
    "spectral_power",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid, 1D or 2D (square in 2D).

    ``points`` is the number of samples per axis and must be even so the
    half-spectrum layout has an unambiguous Nyquist entry.
    """

    dims: int
    points: int
    length: float

    def __post_init__(self) -> None:
        if self.dims not in (1, 2):
            raise ValueError(f"dims must be 1 or 2, got {self.dims}")
        if self.points < 4 or self.points % 2 != 0:
            raise ValueError(f"points must be even and >= 4, got {self.points}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive and finite, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dims

    @property
    def npoints(self) -> int:
        return self.points**self.dims

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.points) * self.dx

    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcastable over the spatial shape."""
        x = self.axis_coords()
        if self.dims == 1:
            return (x,)
        return (x[:, None], x[None, :])


def _spatial_axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(-grid.dims, 0))


def _half_shape(grid: Grid) -> tuple[int, ...]:
    n = grid.points
    if grid.dims == 1:
        return (n // 2 + 1,)
    return (n, n // 2 + 1)


@dataclass(frozen=True)
class Field:
    """Real multichannel field sampled on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        expected = (v.shape[0],) + self.grid.shape if v.ndim > 0 else ()
        if v.ndim != self.grid.dims + 1 or v.shape != expected:
            raise ValueError(
                f"values shape {np.shape(self.values)} does not match "
                f"(channels,)+{self.grid.shape}"
            )
        if v.shape[0] < 1:
            raise ValueError("field needs at least one channel")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    def channel(self, i: int) -> np.ndarray:
        return self.values[i]

    @classmethod
    def from_scalar(cls, grid: Grid, values: np.ndarray) -> "Field":
        """Wrap a single-channel spatial array."""
        return cls(grid, np.asarray(values, dtype=np.float64)[None, ...])


@dataclass(frozen=True)
class Spectrum:
    """Half-spectrum coefficients of a real multichannel field."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        expected = (c.shape[0],) + _half_shape(self.grid) if c.ndim > 0 else ()
        if c.ndim != self.grid.dims + 1 or c.shape != expected:
            raise ValueError(
                f"coeffs shape {np.shape(self.coeffs)} does not match "
                f"(channels,)+{_half_shape(self.grid)}"
            )
        object.__setattr__(self, "coeffs", c)

    @property
    def channels(self) -> int:
        return self.coeffs.shape[0]


def forward_transform(f: Field) -> Spectrum:
    """Unnormalized real-to-complex transform over the spatial axes."""
    return Spectrum(f.grid, np.fft.rfftn(f.values, axes=_spatial_axes(f.grid)))


def inverse_transform(s: Spectrum) -> Field:
    """Inverse of :func:`forward_transform`; divides by the point count."""
    if not np.all(np.isfinite(s.coeffs)):
        raise ValueError("spectrum coefficients must be finite")
    values = np.fft.irfftn(s.coeffs, s=s.grid.shape, axes=_spatial_axes(s.grid))
    return Field(s.grid, values)


@lru_cache(maxsize=None)
def wavenumbers(grid: Grid) -> tuple[np.ndarray, ...]:
    """Per-axis wavenumber arrays matching the half-spectrum layout.

    The last axis is the half axis (modes ``0..n/2``); earlier axes carry the
    full set with numpy's negative wrap.  The Nyquist entry is treated as a
    real mode by every multiplier built on top of these arrays.
    """
    n, dx = grid.points, grid.dx
    full = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    half = 2.0 * np.pi * np.fft.rfftfreq(n, d=dx)
    full.setflags(write=False)
    half.setflags(write=False)
    if grid.dims == 1:
        return (half,)
    return (full, half)


@lru_cache(maxsize=None)
def squared_wavenumbers(grid: Grid) -> np.ndarray:
    """|k|^2 on the half-spectrum layout (used by diffusive multipliers)."""
    ks = wavenumbers(grid)
    if grid.dims == 1:
        out = ks[0] ** 2
    else:
        out = ks[0][:, None] ** 2 + ks[1][None, :] ** 2
    out = np.ascontiguousarray(out)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _dealias_keep_mask(grid: Grid) -> np.ndarray:
    """True where the mode index is at or below two thirds of Nyquist."""
    n = grid.points
    kcut = n // 3
    half_idx = np.arange(n // 2 + 1)
    if grid.dims == 1:
        mask = half_idx <= kcut
    else:
        full_idx = np.abs(np.fft.fftfreq(n, d=1.0 / n).astype(np.int64))
        mask = (full_idx[:, None] <= kcut) & (half_idx[None, :] <= kcut)
    mask = np.ascontiguousarray(mask)
    mask.setflags(write=False)
    return mask


def _copy_between_half_specs(src: np.ndarray, n_src: int, n_dst: int) -> np.ndarray:
    """Embed or truncate half-spectrum coefficients between grid sizes.

    Works on arrays with a leading channel axis and 1 or 2 trailing spatial
    axes.  The Nyquist row/column of the smaller grid is dropped because its
    coefficient folds two conjugate modes together.
    """
    dims = src.ndim - 1
    h = min(n_src, n_dst) // 2
    if dims == 1:
        dst = np.zeros(src.shape[:1] + (n_dst // 2 + 1,), dtype=np.complex128)
        dst[:, :h] = src[:, :h]
    else:
        dst = np.zeros(src.shape[:1] + (n_dst, n_dst // 2 + 1), dtype=np.complex128)
        dst[:, :h, :h] = src[:, :h, :h]
        dst[:, n_dst - h + 1 :, :h] = src[:, n_src - h + 1 :, :h]
    return dst


def dealias_two_thirds_pad(
    s: Spectrum,
    product_fn: Callable[..., np.ndarray],
    *extra: Spectrum,
) -> Spectrum:
    """Alias-free pointwise product evaluated on a 3/2-padded grid.

    ``product_fn`` receives the physical-space sample arrays of ``s`` and any
    ``extra`` spectra (shape ``(channels, *padded_spatial)`` each) and must
    return one such array.  The result is transformed back, truncated to the
    original resolution, and zeroed above two thirds of the Nyquist index so
    no aliased energy survives.
    """
    spectra = (s,) + tuple(extra)
    grid = s.grid
    for other in extra:
        if other.grid != grid:
            raise ValueError("all spectra must share one grid")
    n = grid.points
    m = 3 * n // 2
    if m % 2 != 0:
        raise ValueError(f"3/2 padding of {n} points gives odd size {m}")
    pad_grid = Grid(grid.dims, m, grid.length)
    scale_up = (m / n) ** grid.dims
    axes = _spatial_axes(grid)
    physical = []
    for sp in spectra:
        padded = _copy_between_half_specs(sp.coeffs, n, m) * scale_up
        physical.append(np.fft.irfftn(padded, s=pad_grid.shape, axes=axes))
    prod = np.asarray(product_fn(*physical), dtype=np.float64)
    if prod.shape[1:] != pad_grid.shape:
        raise ValueError(f"product_fn returned shape {prod.shape}, expected (channels,)+{pad_grid.shape}")
    prod_hat = np.fft.rfftn(prod, axes=axes)
    out = _copy_between_half_specs(prod_hat, m, n) / scale_up
    out *= _dealias_keep_mask(grid)
    return Spectrum(grid, out)


def spectral_resample(f: Field, points: int) -> Field:
    """Change resolution by spectral truncation (down) or zero padding (up)."""
    target = Grid(f.grid.dims, points, f.grid.length)
    src = np.fft.rfftn(f.values, axes=_spatial_axes(f.grid))
    dst = _copy_between_half_specs(src, f.grid.points, points)
    dst *= (points / f.grid.points) ** f.grid.dims
    values = np.fft.irfftn(dst, s=target.shape, axes=_spatial_axes(target))
    return Field(target, values)


def spectral_power(s: Spectrum) -> float:
    """Sum of squared field values, computed from the half spectrum.

    Equals ``np.sum(field.values ** 2)`` by Parseval's identity under the
    normalization convention of this module.
    """
    n = s.grid.points
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    mag2 = np.abs(s.coeffs) ** 2
    return float(np.sum(mag2 * w) / s.grid.npoints)
