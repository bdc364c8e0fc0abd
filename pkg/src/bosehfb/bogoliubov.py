"""Translation-invariant HFB eigenvalue problem for a contact interaction.

Each mode ``k`` decouples into the 2x2 problem::

    a u - b v = E u
    a v - conj(b) u = -E v

with ``a = |k|^2 + c_h`` and ``b = c_k``. Stable modes have ``a > |b|`` and
``E = sqrt(a^2 - |b|^2)``; ``a = |b|`` is gapless and ``a < |b|`` unstable.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grid import TorusGrid, laplacian_symbol
from .symplectic import Symplectomorphism

STABLE = "stable"
GAPLESS = "gapless"
UNSTABLE = "unstable"


@dataclass(frozen=True)
class BogoliubovMode:
    """Quasiparticle mode with hyperbolically normalized amplitudes.

    For unstable modes ``E`` is 0, ``growth_rate`` holds ``sqrt(|b|^2 - a^2)``
    and the amplitudes are NaN; for gapless modes ``u`` and ``v`` are not
    normalized (``u = 1``, ``v = 0``).
    """

    k: np.ndarray
    E: float
    u: complex
    v: complex
    status: str = STABLE
    growth_rate: float = 0.0

    @property
    def stable(self) -> bool:
        return self.status == STABLE


def solve_mode(a: float, b: complex, k=None, rel_tol: float = 1e-14) -> BogoliubovMode:
    """Solve one 2x2 mode problem."""
    k = np.zeros(1) if k is None else np.asarray(k, dtype=float)
    gap = a * a - abs(b) ** 2
    scale = max(a * a, abs(b) ** 2, 1e-300)
    if abs(gap) <= rel_tol * scale and a >= 0:
        return BogoliubovMode(k, 0.0, 1.0 + 0j, 0j, GAPLESS)
    if gap < 0 or a < 0:
        rate = float(np.sqrt(max(-gap, 0.0)))
        return BogoliubovMode(k, 0.0, complex(np.nan), complex(np.nan), UNSTABLE, rate)
    E = float(np.sqrt(gap))
    u = np.sqrt((a + E) / (2.0 * E))
    v = np.conj(b) / np.sqrt(2.0 * E * (a + E))
    return BogoliubovMode(k, E, complex(u), complex(v), STABLE)


def default_constants(n_total: float, n0: float, g: float) -> tuple[float, float]:
    """``(c_h, c_k)`` for a homogeneous condensate of density ``n0``.

    The chemical potential that keeps ``phi = sqrt(n0)`` stationary with the
    thermal density ``n_total - n0`` and no anomalous density is
    ``mu = g n0 + 2 g (n_total - n0)``; then ``c_h = 2 g n_total - mu = g n0``
    and ``c_k = g n0`` (gapless at ``k = 0``).
    """
    mu = g * n0 + 2.0 * g * (n_total - n0)
    return 2.0 * g * n_total - mu, g * n0


def bogoliubov_modes(n_total: float, n0: float, g: float, grid: TorusGrid,
                     c_h: float | None = None, c_k: complex | None = None
                     ) -> list[BogoliubovMode]:
    """Per-mode solutions in the grid's mode order.

    ``c_h`` and ``c_k`` default to :func:`default_constants`; pass them
    explicitly for other closures.
    """
    dh, dk = default_constants(n_total, n0, g)
    c_h = dh if c_h is None else c_h
    c_k = dk if c_k is None else c_k
    k2 = laplacian_symbol(grid)
    return [solve_mode(float(q + c_h), c_k, kv) for q, kv in zip(k2, grid.modes)]


def eigen_residual(mode: BogoliubovMode, a: float, b: complex) -> float:
    """Residual of the two eigen-equations for a stable mode."""
    r1 = a * mode.u - b * mode.v - mode.E * mode.u
    r2 = a * mode.v - np.conj(b) * mode.u + mode.E * mode.v
    return float(max(abs(r1), abs(r2)))


def normalization_defect(mode: BogoliubovMode) -> float:
    return abs(abs(mode.u) ** 2 - abs(mode.v) ** 2 - 1.0)


def _plane_waves(grid: TorusGrid) -> np.ndarray:
    return np.exp(1j * grid.positions @ grid.modes.T) / np.sqrt(grid.n_sites)


def modes_symplectomorphism(modes: list[BogoliubovMode], grid: TorusGrid) -> Symplectomorphism:
    """Blocks whose mode functions are the given plane-wave eigenpairs.

    With ``u_j = u* zeta_j`` and ``v_j = -v* zeta_j`` for the plane wave
    ``zeta_j = e_k``, choosing ``u = F diag(conj u_k) F*`` and
    ``v = -F diag(conj v_k) F*`` gives ``u_j = u_k e_k`` and ``v_j = v_k e_k``.
    The amplitudes depend on ``|k|`` only, which makes ``(u, v)`` symplectic.
    Non-stable modes are mapped trivially (``u_k = 1``, ``v_k = 0``).
    """
    F = _plane_waves(grid)
    uk = np.array([m.u if m.stable else 1.0 for m in modes], dtype=complex)
    vk = np.array([m.v if m.stable else 0.0 for m in modes], dtype=complex)
    Fh = F.conj().T
    return Symplectomorphism((F * uk.conj()) @ Fh, -(F * vk.conj()) @ Fh)


def mode_functions(U: Symplectomorphism, grid: TorusGrid, t: float = 0.0, energies=None):
    """``u_j = u* zeta_j`` and ``v_j = -v* zeta_j`` (site values) for plane waves ``zeta_j``.

    With ``energies`` both carry the phase ``exp(-i t E_j)``.
    """
    F = _plane_waves(grid)
    uj = U.u.conj().T @ F
    vj = -U.v.conj().T @ F
    if energies is not None:
        phase = np.exp(-1j * t * np.asarray(energies))
        uj = uj * phase
        vj = vj * phase
    s = 1.0 / np.sqrt(grid.cell_volume)
    return uj * s, vj * s


def diagonal_densities(uj: np.ndarray, vj: np.ndarray, occupations) -> tuple[np.ndarray, np.ndarray]:
    """``gamma(x; x)`` and ``sigma(x, x)`` from mode functions and occupations ``N_j``.

    ``gamma(x; x) = sum_j N_j |u_j|^2 + (1 + N_j) |v_j|^2`` and
    ``sigma(x, x) = -sum_j u_j conj(v_j) (1 + 2 N_j)``. The minus sign follows
    from ``v_j = -v* zeta_j`` together with
    ``sigma = u* g' v + v^T (1 + conj g') conj u``.
    """
    N = np.asarray(occupations, dtype=float)
    gam = np.sum(N * np.abs(uj) ** 2 + (1.0 + N) * np.abs(vj) ** 2, axis=1)
    sig = -np.sum(uj * vj.conj() * (1.0 + 2.0 * N), axis=1)
    return gam, sig


def assemble_from_modes(U: Symplectomorphism, grid: TorusGrid, occupations):
    """Operator matrices ``(gamma, sigma)`` of ``Gamma = U* diag(g', 1 + conj g') U``
    with ``g' = sum_j N_j |zeta_j><zeta_j|``."""
    F = _plane_waves(grid)
    gp = (F * np.asarray(occupations, dtype=float)) @ F.conj().T
    one = np.eye(grid.n_sites) + gp.conj()
    u, v = U.u, U.v
    G = u.conj().T @ gp @ u + v.T @ one @ v.conj()
    S = u.conj().T @ gp @ v + v.T @ one @ u.conj()
    return G, S


MODE_CSV_SPATIAL = ("kx", "ky", "kz")


def modes_to_csv(modes: list[BogoliubovMode], path) -> None:
    dim = len(modes[0].k) if modes else 1
    header = [MODE_CSV_SPATIAL[i] if i < 3 else f"k{i}" for i in range(dim)]
    header += ["E", "re_u", "im_u", "re_v", "im_v", "stable_flag"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for m in modes:
            row = [f"{x:.17g}" for x in m.k]
            row += [f"{x:.17g}" for x in (m.E, m.u.real, m.u.imag, m.v.real, m.v.imag)]
            row.append(m.status)
            w.writerow(row)
