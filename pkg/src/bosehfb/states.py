"""Quasifree states ``(phi, gamma, sigma)``, admissibility and Wick moments.

``phi`` holds condensate values ``phi(x)``; ``gamma`` and ``sigma`` hold kernel
values ``gamma(x; y)`` and ``sigma(x, y)``. The discrete canonical commutation
relation is ``[psi(x), psi*(y)] = dx^{-d} delta_xy``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import GridField, GridKernel, TorusGrid

ANNIHILATE = "a"
CREATE = "c"

FORMAT_VERSION = 1

# relative PSD tolerance (times the operator norm of Gamma)
PSD_RTOL = 1e-10
STRUCT_RTOL = 1e-12


class InadmissibleStateError(ValueError):
    """Raised when a state fails the positivity/structure checks."""


@dataclass(frozen=True, eq=False)
class QuasifreeState:
    phi: GridField
    gamma: GridKernel
    sigma: GridKernel

    def __post_init__(self):
        grids = {self.phi.grid, self.gamma.grid, self.sigma.grid}
        if len(grids) != 1:
            raise ValueError("phi, gamma and sigma live on different grids")

    @property
    def grid(self) -> TorusGrid:
        return self.phi.grid

    def matrices(self):
        """``(c, G, S)``: orthonormal-basis coefficients of phi and operator
        matrices of gamma and sigma."""
        return self.phi.coefficients(), self.gamma.matrix(), self.sigma.matrix()

    @classmethod
    def from_matrices(cls, grid: TorusGrid, c, G, S) -> QuasifreeState:
        return cls(GridField.from_coefficients(grid, c),
                   GridKernel.from_matrix(grid, G),
                   GridKernel.from_matrix(grid, S))

    @classmethod
    def vacuum(cls, grid: TorusGrid) -> QuasifreeState:
        n = grid.n_sites
        return cls(GridField(grid, np.zeros(n)), GridKernel.zeros(grid), GridKernel.zeros(grid))


@dataclass(frozen=True)
class AdmissibilityReport:
    """Largest violation of each structural condition (0 means satisfied).

    ``psd`` and ``schur`` are negative-eigenvalue magnitudes; ``trace_bound``
    is the excess of ``1/2 ||sigma||_HS^2`` over ``Tr gamma (1 + Tr gamma)``.
    """

    hermiticity: float
    psd: float
    symmetry: float
    schur: float
    trace_bound: float
    tol_psd: float
    tol_struct: float

    @property
    def admissible(self) -> bool:
        return (self.hermiticity <= self.tol_struct
                and self.symmetry <= self.tol_struct
                and self.psd <= self.tol_psd
                and self.schur <= self.tol_psd
                and self.trace_bound <= self.tol_psd)

    def max_violation(self) -> float:
        return max(self.hermiticity, self.psd, self.symmetry, self.schur, self.trace_bound)


def gamma_block_matrix(G: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Operator matrix ``[[G, S], [conj S, 1 + conj G]]``."""
    n = G.shape[0]
    return np.block([[G, S], [S.conj(), np.eye(n) + G.conj()]])


def _min_eig_hermitian(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def admissibility_from_matrices(G: np.ndarray, S: np.ndarray) -> AdmissibilityReport:
    n = G.shape[0]
    gam = gamma_block_matrix(G, S)
    gam_norm = float(np.linalg.norm(0.5 * (gam + gam.conj().T), 2))
    tol_psd = PSD_RTOL * max(gam_norm, 1.0)
    tol_struct = STRUCT_RTOL * max(gam_norm, 1.0)

    herm = float(np.max(np.abs(G - G.conj().T), initial=0.0))
    symm = float(np.max(np.abs(S - S.T), initial=0.0))
    Gh = 0.5 * (G + G.conj().T)
    psd = max(0.0, -_min_eig_hermitian(Gh))
    # Schur complement of the (1 + conj gamma) block
    inner = np.linalg.solve(np.eye(n) + Gh.conj(), S.conj().T)
    schur = max(0.0, -_min_eig_hermitian(Gh - S @ inner))
    tr = float(np.real(np.trace(Gh)))
    hs2 = float(np.sum(np.abs(S) ** 2))
    trace_bound = max(0.0, 0.5 * hs2 - max(tr, 0.0) * (1.0 + max(tr, 0.0)))
    return AdmissibilityReport(herm, psd, symm, schur, trace_bound, tol_psd, tol_struct)


def check_admissible(rho: QuasifreeState) -> AdmissibilityReport:
    _, G, S = rho.matrices()
    return admissibility_from_matrices(G, S)


@dataclass(frozen=True, eq=False)
class GeneralizedDensityMatrix:
    """``[[gamma, sigma], [conj sigma, 1 + conj gamma]]`` in kernel form.

    The identity block is the grid delta ``dx^{-d} delta_xy``; :meth:`matrix`
    returns the dimensionless operator matrix.
    """

    grid: TorusGrid
    blocks: np.ndarray

    def matrix(self) -> np.ndarray:
        return self.blocks * self.grid.cell_volume

    def min_eigenvalue(self) -> float:
        return _min_eig_hermitian(self.matrix())

    def hermiticity(self) -> float:
        m = self.matrix()
        return float(np.max(np.abs(m - m.conj().T)))


def build_gamma_matrix(rho: QuasifreeState) -> GeneralizedDensityMatrix:
    report = check_admissible(rho)
    if not report.admissible:
        raise InadmissibleStateError(f"state is not admissible: {report}")
    _, G, S = rho.matrices()
    mat = gamma_block_matrix(G, S)
    mat = 0.5 * (mat + mat.conj().T)
    return GeneralizedDensityMatrix(rho.grid, mat / rho.grid.cell_volume)


def repair_state(rho: QuasifreeState) -> tuple[QuasifreeState, float]:
    """Hermitize gamma, clip its negative eigenvalues and symmetrize sigma.

    Returns the repaired state and the largest clipped eigenvalue magnitude.
    Never applied implicitly.
    """
    c, G, S = rho.matrices()
    G, S, clipped = repair_matrices(G, S)
    return QuasifreeState.from_matrices(rho.grid, c, G, S), clipped


def repair_matrices(G, S):
    Gh = 0.5 * (G + G.conj().T)
    w, vecs = np.linalg.eigh(Gh)
    clipped = float(max(0.0, -w.min())) if w.size else 0.0
    if clipped > 0.0:
        Gh = (vecs * np.clip(w, 0.0, None)) @ vecs.conj().T
    return Gh, 0.5 * (S + S.T), clipped


# --- Wick moments -----------------------------------------------------------

def _one_point(rho: QuasifreeState, op) -> complex:
    site, flavor = op
    val = rho.phi.values[site]
    return complex(val if flavor == ANNIHILATE else np.conj(val))


def _two_point(rho: QuasifreeState, op1, op2) -> complex:
    (x, f1), (y, f2) = op1, op2
    phi = rho.phi.values
    gam = rho.gamma.values
    sig = rho.sigma.values
    if f1 == ANNIHILATE and f2 == ANNIHILATE:
        return complex(sig[x, y] + phi[x] * phi[y])
    if f1 == CREATE and f2 == ANNIHILATE:
        return complex(gam[y, x] + np.conj(phi[x]) * phi[y])
    if f1 == ANNIHILATE and f2 == CREATE:
        delta = 1.0 / rho.grid.cell_volume if x == y else 0.0
        return complex(gam[x, y] + phi[x] * np.conj(phi[y]) + delta)
    return complex(np.conj(sig[y, x] + phi[y] * phi[x]))


def _validate_ops(rho: QuasifreeState, ops) -> list[tuple[int, str]]:
    out = []
    for op in ops:
        site, flavor = op
        if flavor not in (ANNIHILATE, CREATE):
            raise ValueError(f"unknown flavor {flavor!r}")
        if not 0 <= int(site) < rho.grid.n_sites:
            raise IndexError(f"site {site} outside grid")
        out.append((int(site), flavor))
    return out


def wick_expectation(rho: QuasifreeState, ops: Sequence[tuple[int, str]]) -> complex:
    """Expectation of the ordered monomial ``psi#(x_1) ... psi#(x_n)``, ``n <= 4``.

    ``ops`` is a sequence of ``(site, flavor)`` with flavor :data:`ANNIHILATE`
    or :data:`CREATE`.
    """
    ops = _validate_ops(rho, ops)
    n = len(ops)
    if not 1 <= n <= 4:
        raise ValueError(f"monomials of length 1..4 supported, got {n}")
    if n == 1:
        return _one_point(rho, ops[0])
    if n == 2:
        return _two_point(rho, *ops)
    singles = [_one_point(rho, op) for op in ops]
    prod = math.prod(singles)
    if n == 3:
        w = _two_point
        return (singles[0] * w(rho, ops[1], ops[2])
                + singles[1] * w(rho, ops[0], ops[2])
                + singles[2] * w(rho, ops[0], ops[1])
                - 2.0 * prod)
    w = _two_point
    return (w(rho, ops[0], ops[1]) * w(rho, ops[2], ops[3])
            + w(rho, ops[0], ops[2]) * w(rho, ops[1], ops[3])
            + w(rho, ops[0], ops[3]) * w(rho, ops[1], ops[2])
            - 2.0 * prod)


# --- sampling ---------------------------------------------------------------

def low_mode_projector(grid: TorusGrid, cutoff: int) -> np.ndarray:
    """Orthogonal projector onto plane waves with ``max |m| <= cutoff``."""
    keep = np.all(np.abs(grid.mode_indices) <= cutoff, axis=1)
    k = grid.modes[keep]
    waves = np.exp(1j * grid.positions @ k.T) / np.sqrt(grid.n_sites)
    P = waves @ waves.conj().T
    return np.real_if_close(0.5 * (P + P.conj().T), tol=1e6)


def sample_random_state(grid: TorusGrid, seed: int, scale: float,
                        cutoff: int | None = None) -> QuasifreeState:
    """Random admissible state ``Gamma = U diag(g', 1 + conj g') U*``.

    ``g' >= 0`` is a random positive matrix, ``U`` a random symplectomorphism
    and ``phi`` a random field, all proportional to ``scale``. With ``cutoff``
    every ingredient is restricted to modes with ``max |m| <= cutoff`` so the
    state is smooth.
    """
    from .symplectic import random_symplectomorphism

    rng = np.random.default_rng(seed)
    n = grid.n_sites
    if scale == 0:
        return QuasifreeState.vacuum(grid)
    P = np.eye(n) if cutoff is None else low_mode_projector(grid, cutoff)
    A = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2 * n)
    gp = scale * (A @ A.conj().T)
    gp = P @ gp @ P
    gp = 0.5 * (gp + gp.conj().T)
    U = random_symplectomorphism(n, rng, scale, projector=P)
    D = gamma_block_matrix(gp, np.zeros((n, n)))
    full = U.matrix() @ D @ U.matrix().conj().T
    G = full[:n, :n]
    S = full[:n, n:]
    G = 0.5 * (G + G.conj().T)
    S = 0.5 * (S + S.T)
    c = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    c = P @ c
    return QuasifreeState.from_matrices(grid, c, G, S)


def squeezed_state(grid: TorusGrid, r: float) -> QuasifreeState:
    """Pure single-mode squeezed state on the normalized constant mode."""
    n = grid.n_sites
    e0 = np.full(n, 1.0 / np.sqrt(n))  # orthonormal-basis coefficients
    G = np.sinh(r) ** 2 * np.outer(e0, e0)
    S = np.cosh(r) * np.sinh(r) * np.outer(e0, e0)
    return QuasifreeState.from_matrices(grid, np.zeros(n), G, S)


# --- snapshot files ---------------------------------------------------------

def save_state(path, rho: QuasifreeState) -> None:
    """Write a snapshot (NumPy ``.npz``; layout in ``docs/state_format.md``)."""
    g = rho.grid
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format_version=np.array(FORMAT_VERSION, dtype=np.int64),
            dim=np.array(g.dim, dtype=np.int64),
            points_per_side=np.array(g.points_per_side, dtype=np.int64),
            half_length=np.array(g.half_length, dtype=np.float64),
            phi=np.ascontiguousarray(rho.phi.values, dtype=np.complex128),
            gamma=np.ascontiguousarray(rho.gamma.values, dtype=np.complex128),
            sigma=np.ascontiguousarray(rho.sigma.values, dtype=np.complex128),
        )


def load_state(path) -> QuasifreeState:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported snapshot format_version {version}")
        grid = TorusGrid(int(data["dim"]), int(data["points_per_side"]),
                         float(data["half_length"]))
        return QuasifreeState(GridField(grid, data["phi"]),
                              GridKernel(grid, data["gamma"]),
                              GridKernel(grid, data["sigma"]))
