"""Mean-field operators ``b[gamma]``, ``k(sigma)`` and ``h(gamma) = -Lap + V + b[gamma]``.

A pair potential is either a grid function ``v(x)`` (even, real) or a contact
interaction ``g delta``. In contact mode ``b[gamma]`` is multiplication by
``2 g d(gamma)`` and ``k(sigma)`` multiplication by ``g d(sigma)``.

Besides the kernel-level API (``GridKernel`` in, ``OneBodyOperator`` out) the
:class:`MeanField` helper works directly on operator matrices; the dynamics
uses that form.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .grid import (GridField, GridKernel, TorusGrid, apply_minus_laplacian,
                   fourier_coefficients, inverse_fourier_coefficients,
                   kinetic_matrix)

GRID_FUNCTION = "grid_function"
CONTACT = "contact"


def reflect(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Samples of ``f(-x)`` from samples of ``f(x)``."""
    n = grid.points_per_side
    arr = np.asarray(values).reshape(grid.shape)
    idx = (n - np.arange(n)) % n
    for a in range(grid.dim):
        arr = np.take(arr, idx, axis=a)
    return arr.reshape(-1)


@dataclass(frozen=True, eq=False)
class PotentialPair:
    """External potential ``V`` together with the pair interaction.

    Build with :meth:`grid_function` or :meth:`contact`.
    """

    grid: TorusGrid
    external: GridField
    mode: str
    pair: GridField | None = None
    coupling: float = 0.0

    @classmethod
    def grid_function(cls, grid: TorusGrid, v, V=None) -> PotentialPair:
        vals = np.asarray(v.values if isinstance(v, GridField) else v, dtype=complex)
        vals = vals.reshape(-1)
        if np.max(np.abs(vals.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(vals))):
            raise ValueError("pair potential must be real")
        vals = vals.real
        vals = 0.5 * (vals + reflect(grid, vals))
        return cls(grid, _external(grid, V), GRID_FUNCTION, GridField(grid, vals), 0.0)

    @classmethod
    def contact(cls, grid: TorusGrid, g: float, V=None) -> PotentialPair:
        if g < 0:
            raise ValueError(f"contact coupling must be >= 0, got {g}")
        return cls(grid, _external(grid, V), CONTACT, None, float(g))

    @cached_property
    def pair_fourier(self) -> np.ndarray | None:
        if self.mode == CONTACT:
            return None
        return fourier_coefficients(self.grid, self.pair.values)

    @cached_property
    def displacement_matrix(self) -> np.ndarray | None:
        """``v(x_i - x_j)`` as an ``N^d x N^d`` array (grid-function mode only)."""
        if self.mode == CONTACT:
            return None
        return self.pair.values[self.grid.displacement_index]


def _external(grid: TorusGrid, V) -> GridField:
    if V is None:
        return GridField(grid, np.zeros(grid.n_sites))
    vals = V.values if isinstance(V, GridField) else np.asarray(V)
    return GridField(grid, np.real(vals))


@dataclass(frozen=True, eq=False)
class OneBodyOperator:
    """``[-Lap] + multiplication + nonlocal kernel``; any part may be absent."""

    grid: TorusGrid
    kinetic: bool
    multiplication: GridField
    nonlocal_part: GridKernel | None = None

    def matrix(self) -> np.ndarray:
        m = np.diag(self.multiplication.values).astype(complex)
        if self.kinetic:
            m = m + kinetic_matrix(self.grid)
        if self.nonlocal_part is not None:
            m = m + self.nonlocal_part.matrix()
        return m

    def apply(self, f: GridField) -> GridField:
        out = self.multiplication.values * f.values
        if self.kinetic:
            out = out + apply_minus_laplacian(f).values
        if self.nonlocal_part is not None:
            out = out + self.grid.cell_volume * (self.nonlocal_part.values @ f.values)
        return GridField(self.grid, out)


def diag_of(alpha: GridKernel) -> GridField:
    """``d(alpha)(x) = alpha(x, x)``."""
    return GridField(alpha.grid, np.diagonal(alpha.values).copy())


def hadamard_v(pot: PotentialPair, alpha: GridKernel):
    """``v(x - y) alpha(x, y)``; in contact mode the multiplication field ``g d(alpha)``."""
    if pot.mode == CONTACT:
        return GridField(alpha.grid, pot.coupling * np.diagonal(alpha.values))
    out = kernels.hadamard_displacement(pot.pair.values.astype(complex), alpha.values,
                                        alpha.grid.displacement_index)
    return GridKernel(alpha.grid, out)


def convolve(pot: PotentialPair, n: GridField) -> GridField:
    """Periodic convolution ``(v * n)(x) = int v(x - y) n(y) dy`` via FFT."""
    grid = n.grid
    nh = fourier_coefficients(grid, n.values)
    return GridField(grid, inverse_fourier_coefficients(grid, pot.pair_fourier * nh))


def b_op(pot: PotentialPair, gamma: GridKernel) -> OneBodyOperator:
    grid = gamma.grid
    dens = diag_of(gamma)
    if pot.mode == CONTACT:
        return OneBodyOperator(grid, False, GridField(grid, 2.0 * pot.coupling * dens.values))
    direct = convolve(pot, dens)
    return OneBodyOperator(grid, False, direct, hadamard_v(pot, gamma))


def k_op(pot: PotentialPair, sigma: GridKernel):
    """Pairing operator ``k(sigma)``: a kernel, or a multiplication field in contact mode."""
    return hadamard_v(pot, sigma)


def h_op(pot: PotentialPair, V, gamma: GridKernel) -> OneBodyOperator:
    grid = gamma.grid
    b = b_op(pot, gamma)
    Vf = _external(grid, V)
    mult = GridField(grid, Vf.values + b.multiplication.values)
    return OneBodyOperator(grid, True, mult, b.nonlocal_part)


def k_matrix_of(pot: PotentialPair, sigma: GridKernel) -> np.ndarray:
    k = k_op(pot, sigma)
    if isinstance(k, GridField):
        return np.diag(k.values)
    return k.matrix()


class MeanField:
    """Operator-matrix versions of ``h``, ``b`` and ``k`` for a fixed potential pair.

    All arguments and results are operator matrices in the orthonormal site
    basis (see :mod:`bosehfb.grid`).
    """

    def __init__(self, pot: PotentialPair, V=None):
        self.pot = pot
        self.grid = pot.grid
        V = pot.external if V is None else _external(self.grid, V)
        self.V = V
        self.kinetic = kinetic_matrix(self.grid)
        self.h0 = self.kinetic + np.diag(V.values.real)
        self.inv_dv = 1.0 / self.grid.cell_volume
        self.contact = pot.mode == CONTACT
        self.g = pot.coupling
        if not self.contact:
            self.vdisp = pot.displacement_matrix
            self.vhat = pot.pair_fourier

    def density(self, G: np.ndarray) -> np.ndarray:
        return np.diagonal(G) * self.inv_dv

    def b(self, G: np.ndarray) -> np.ndarray:
        n = self.density(G)
        if self.contact:
            return np.diag(2.0 * self.g * n)
        direct = inverse_fourier_coefficients(
            self.grid, self.vhat * fourier_coefficients(self.grid, n))
        return np.diag(direct) + self.vdisp * G

    def k(self, S: np.ndarray) -> np.ndarray:
        if self.contact:
            return np.diag(self.g * np.diagonal(S) * self.inv_dv)
        return self.vdisp * S

    def h(self, G: np.ndarray) -> np.ndarray:
        return self.h0 + self.b(G)
