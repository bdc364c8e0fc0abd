"""Periodic torus grid, spectral transforms and grid-backed fields/kernels.

The torus is ``[-L, L)^d`` with ``N`` points per side, sites at
``x_j = -L + j * dx`` (so ``x = 0`` is a site) and dual modes
``k = (pi / L) * m`` with ``m`` in ``{-N/2, ..., N/2 - 1}``.

Fourier normalization::

    f_hat(k) = dx^d * sum_x f(x) exp(-i k.x)
    f(x)     = |Lambda|^{-1} * sum_k f_hat(k) exp(i k.x)

Sites and modes are both enumerated row-major (lexicographic, last axis
fastest), modes in increasing order of ``m`` along each axis.

Two representations of operators are used throughout the package:

* kernel values ``K(x_i; x_j)`` (what :class:`GridKernel` stores), acting as
  ``(K f)(x) = dx^d * sum_y K(x; y) f(y)``; the identity is ``dx^{-d} delta``;
* operator matrices ``M = dx^d * K``, i.e. matrix elements in the orthonormal
  basis ``dx^{-d/2} delta_x``. Products, traces and spectra of operators are
  plain matrix operations in this form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True, eq=False)
class TorusGrid:
    """Uniform grid on the torus ``R^d / 2L Z^d``."""

    dim: int
    points_per_side: int
    half_length: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        n = self.points_per_side
        if n < 2 or n % 2:
            raise ValueError(f"points_per_side must be even and >= 2, got {n}")
        if not self.half_length > 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.points_per_side

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.half_length) ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_side,) * self.dim

    @property
    def n_sites(self) -> int:
        return self.points_per_side ** self.dim

    @cached_property
    def mode_indices(self) -> np.ndarray:
        """Integer mode labels ``m``, shape ``(N^d, d)``, lexicographic."""
        n = self.points_per_side
        axis = np.arange(-n // 2, n // 2)
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def modes(self) -> np.ndarray:
        """Dual-lattice vectors ``k``, shape ``(N^d, d)``."""
        return self.mode_indices * (np.pi / self.half_length)

    @cached_property
    def site_indices(self) -> np.ndarray:
        n = self.points_per_side
        axis = np.arange(n)
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def positions(self) -> np.ndarray:
        """Site coordinates, shape ``(N^d, d)``."""
        return -self.half_length + self.site_indices * self.spacing

    @cached_property
    def zero_mode(self) -> int:
        return int(np.flatnonzero(~self.mode_indices.any(axis=1))[0])

    @cached_property
    def displacement_index(self) -> np.ndarray:
        """Flat site index of the minimal-image displacement ``x_i - x_j``.

        Entry ``(i, j)`` is the site ``s`` with ``x_s = x_i - x_j`` wrapped
        into ``[-L, L)``; since ``x_s = -L + s dx`` this is
        ``s = (i - j + N/2) mod N`` per axis.
        """
        n = self.points_per_side
        idx = self.site_indices
        flat = np.zeros((self.n_sites, self.n_sites), dtype=np.intp)
        for a in range(self.dim):
            s = (idx[:, a][:, None] - idx[:, a][None, :] + n // 2) % n
            flat = flat * n + s
        return flat

    @cached_property
    def _fft_perm(self) -> np.ndarray:
        # position of each lexicographic mode inside the fftn output (flattened)
        n = self.points_per_side
        flat = np.zeros(self.n_sites, dtype=np.intp)
        for a in range(self.dim):
            flat = flat * n + (self.mode_indices[:, a] % n)
        return flat

    @cached_property
    def _fft_phase(self) -> np.ndarray:
        # exp(-i k . x_0) with x_0 = (-L, ..., -L): (-1)^{sum m}
        return np.where(self.mode_indices.sum(axis=1) % 2 == 0, 1.0, -1.0)

    def __repr__(self):
        return (f"TorusGrid(dim={self.dim}, points_per_side={self.points_per_side}, "
                f"half_length={self.half_length!r})")

    def __eq__(self, other):
        if not isinstance(other, TorusGrid):
            return NotImplemented
        return (self.dim, self.points_per_side, self.half_length) == (
            other.dim, other.points_per_side, other.half_length)

    def __hash__(self):
        return hash((self.dim, self.points_per_side, self.half_length))


def make_grid(d: int, N: int, L: float) -> TorusGrid:
    return TorusGrid(int(d), int(N), float(L))


@dataclass(frozen=True, eq=False)
class GridField:
    """Complex samples of a function on the grid sites (or a spectrum on the modes)."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).reshape(-1)
        if vals.size != self.grid.n_sites:
            raise ValueError(
                f"field has {vals.size} values, grid has {self.grid.n_sites} sites")
        object.__setattr__(self, "values", vals)

    def coefficients(self) -> np.ndarray:
        """Coefficients in the orthonormal site basis (``dx^{d/2} f``)."""
        return self.values * np.sqrt(self.grid.cell_volume)

    @classmethod
    def from_coefficients(cls, grid: TorusGrid, coeffs) -> GridField:
        return cls(grid, np.asarray(coeffs) / np.sqrt(grid.cell_volume))

    def norm2(self) -> float:
        return float(self.grid.cell_volume * np.sum(np.abs(self.values) ** 2))


@dataclass(frozen=True, eq=False)
class GridKernel:
    """Integral kernel ``K(x_i; x_j)`` sampled on site pairs."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        n = self.grid.n_sites
        if vals.shape != (n, n):
            raise ValueError(f"kernel shape {vals.shape} does not match ({n}, {n})")
        object.__setattr__(self, "values", vals)

    def matrix(self) -> np.ndarray:
        """Operator matrix ``dx^d * K``."""
        return self.values * self.grid.cell_volume

    @classmethod
    def from_matrix(cls, grid: TorusGrid, mat) -> GridKernel:
        return cls(grid, np.asarray(mat) / grid.cell_volume)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> GridKernel:
        return cls(grid, np.zeros((grid.n_sites, grid.n_sites), dtype=complex))


def _check_field(f: GridField) -> TorusGrid:
    if not isinstance(f, GridField):
        raise TypeError(f"expected GridField, got {type(f).__name__}")
    return f.grid


def fourier_coefficients(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Transform raw site values (last axis over sites) to mode coefficients."""
    vals = np.asarray(values)
    lead = vals.shape[:-1]
    spatial = vals.reshape(lead + grid.shape)
    axes = tuple(range(len(lead), len(lead) + grid.dim))
    out = np.fft.fftn(spatial, axes=axes).reshape(lead + (grid.n_sites,))
    return out[..., grid._fft_perm] * grid._fft_phase * grid.cell_volume


def inverse_fourier_coefficients(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    c = np.asarray(coeffs, dtype=complex)
    lead = c.shape[:-1]
    buf = np.empty(lead + (grid.n_sites,), dtype=complex)
    buf[..., grid._fft_perm] = c * grid._fft_phase
    spatial = buf.reshape(lead + grid.shape)
    axes = tuple(range(len(lead), len(lead) + grid.dim))
    # ifftn carries 1/N^d; the inverse needs 1/|Lambda| = 1/(N^d dx^d)
    out = np.fft.ifftn(spatial, axes=axes) / grid.cell_volume
    return out.reshape(lead + (grid.n_sites,))


def to_fourier(f: GridField) -> GridField:
    """Spectral coefficients ``f_hat(k)``, stored in mode order."""
    grid = _check_field(f)
    return GridField(grid, fourier_coefficients(grid, f.values))


def from_fourier(f_hat: GridField) -> GridField:
    grid = _check_field(f_hat)
    return GridField(grid, inverse_fourier_coefficients(grid, f_hat.values))


def laplacian_symbol(grid: TorusGrid) -> np.ndarray:
    """``|k|^2`` per mode (Nyquist modes keep their signed value)."""
    return np.sum(grid.modes ** 2, axis=1)


def apply_minus_laplacian(f: GridField) -> GridField:
    grid = _check_field(f)
    coeffs = fourier_coefficients(grid, f.values) * laplacian_symbol(grid)
    return GridField(grid, inverse_fourier_coefficients(grid, coeffs))


def kinetic_matrix(grid: TorusGrid) -> np.ndarray:
    """Operator matrix of ``-Laplacian`` in the orthonormal site basis.

    Entry ``(i, j)`` is ``N^{-d} sum_k |k|^2 exp(i k.(x_i - x_j))``; it depends
    only on the displacement, so it is tabulated once and gathered.
    """
    k2 = laplacian_symbol(grid)
    # t(s) = N^{-d} sum_k |k|^2 exp(i k.(x_s)) with x_s the displacement site
    t = inverse_fourier_coefficients(grid, k2) * grid.cell_volume
    mat = t[grid.displacement_index]
    # exact for even N: the displacement table is real up to rounding
    return np.real_if_close(0.5 * (mat + mat.conj().T), tol=1e6).astype(float)


def displacement_values(grid: TorusGrid, f) -> np.ndarray:
    """Matrix ``F[i, j] = f(x_i - x_j)`` (minimal image) from site samples of ``f``."""
    vals = f.values if isinstance(f, GridField) else np.asarray(f)
    return vals[grid.displacement_index]


def plane_wave(grid: TorusGrid, m) -> GridField:
    """``exp(i k.x)`` with ``k = (pi/L) m``."""
    k = np.asarray(m, dtype=float).reshape(grid.dim) * (np.pi / grid.half_length)
    return GridField(grid, np.exp(1j * grid.positions @ k))


def mode_index(grid: TorusGrid, m) -> int:
    """Flat position of the mode with integer label ``m`` in the mode order."""
    m = np.asarray(m, dtype=int).reshape(grid.dim)
    n = grid.points_per_side
    if np.any(m < -n // 2) or np.any(m >= n // 2):
        raise ValueError(f"mode {m.tolist()} outside [-N/2, N/2)")
    flat = 0
    for a in range(grid.dim):
        flat = flat * n + int(m[a] + n // 2)
    return flat
