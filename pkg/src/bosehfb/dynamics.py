"""Time integration of the HFB equations for ``(phi, gamma, sigma)``.

Internally the state is carried as ``(c, G, S)``: orthonormal-basis
coefficients of ``phi`` and operator matrices of ``gamma`` and ``sigma``.
In that form the right-hand side reads::

    i dc = h(G) c + K conj(c)
    i dG = [Hp, G] + K S* - S K*
    i dS = Hp S + S Hp^T + K G^T + G K^T + K

with ``Hp = h(G + c c*)`` and ``K = k(S + c c^T)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import GridField, GridKernel, TorusGrid, laplacian_symbol
from .meanfield import MeanField, PotentialPair
from .observables import energy_matrices, particle_number_matrices
from .states import (InadmissibleStateError, QuasifreeState, admissibility_from_matrices,
                     gamma_block_matrix, repair_matrices)

RK4 = "rk4"
STRANG_SPLIT = "strang_split"
ETDRK4 = "etdrk4"
SCHEMES = (RK4, STRANG_SPLIT, ETDRK4)

VIOLATION_CEILING = 1e-4


class NumericalAbortError(RuntimeError):
    """Raised when an integration produces NaN/inf or exceeds a drift ceiling."""


@dataclass(frozen=True)
class HfbRhs:
    """Time derivatives ``(d phi/dt, d gamma/dt, d sigma/dt)`` in field/kernel form."""

    dphi: GridField
    dgamma: GridKernel
    dsigma: GridKernel


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    scheme: str = RK4
    t_final: float = 0.0
    output_stride: int = 1
    repair_drift: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_final >= 0:
            raise ValueError(f"t_final must be >= 0, got {self.t_final}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.output_stride < 1:
            raise ValueError("output_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


# --- right-hand side ----------------------------------------------------------

def rhs_matrices(mf: MeanField, c, G, S, include_kinetic: bool = True):
    """``(dc, dG, dS)`` for the matrix form of the equations.

    With ``include_kinetic=False`` the one-body part ``-Lap`` is dropped from
    ``h``; the splitting and exponential schemes treat it exactly.
    """
    Hg = mf.h(G)
    Hp = Hg + mf.b(np.outer(c, c.conj()))
    if not include_kinetic:
        Hg = Hg - mf.kinetic
        Hp = Hp - mf.kinetic
    K = mf.k(S + np.outer(c, c))
    i_dc = Hg @ c + K @ c.conj()
    KSh = K @ S.conj().T
    i_dG = Hp @ G - G @ Hp + KSh - KSh.conj().T
    HS = Hp @ S
    KG = K @ G.T
    i_dS = HS + HS.T + KG + KG.T + K
    return -1j * i_dc, -1j * i_dG, -1j * i_dS


def hfb_rhs(rho: QuasifreeState, pot: PotentialPair, V=None) -> HfbRhs:
    """Right-hand side of the HFB equations at ``rho``."""
    grid = rho.grid
    if pot.grid != grid:
        raise ValueError("state and potential live on different grids")
    mf = MeanField(pot, V)
    dc, dG, dS = rhs_matrices(mf, *rho.matrices())
    return HfbRhs(GridField.from_coefficients(grid, dc),
                  GridKernel.from_matrix(grid, dG),
                  GridKernel.from_matrix(grid, dS))


# --- linear (kinetic) propagator ---------------------------------------------

def _plane_wave_basis(grid: TorusGrid) -> np.ndarray:
    return np.exp(1j * grid.positions @ grid.modes.T) / np.sqrt(grid.n_sites)


@dataclass(frozen=True, eq=False)
class LinearPropagator:
    """``exp(-i dt A)`` for ``V = 0``, with the pairing part of ``A`` left out.

    ``phi -> E phi``, ``gamma -> E gamma E*`` and ``sigma -> E sigma E^T``
    with ``E = exp(i dt Lap)``; on Fourier coefficients these are the phases
    ``exp(-i dt |k|^2)`` and ``exp(-i dt (|k|^2 + |k'|^2))``.
    """

    grid: TorusGrid
    dt: float
    unitary: np.ndarray = field(repr=False)

    def apply_matrices(self, c, G, S):
        E = self.unitary
        return E @ c, E @ G @ E.conj().T, E @ S @ E.T

    def __call__(self, rho: QuasifreeState) -> QuasifreeState:
        return QuasifreeState.from_matrices(self.grid, *self.apply_matrices(*rho.matrices()))


def linear_propagator(dt: float, grid: TorusGrid, V=None, pot: PotentialPair | None = None
                      ) -> LinearPropagator:
    ext = V if V is not None else (pot.external if pot is not None else None)
    if ext is not None:
        vals = ext.values if isinstance(ext, GridField) else np.asarray(ext)
        if np.any(np.asarray(vals) != 0):
            raise ValueError("the exact linear propagator requires V = 0")
    F = _plane_wave_basis(grid)
    phase = np.exp(-1j * dt * laplacian_symbol(grid))
    E = (F * phase) @ F.conj().T
    return LinearPropagator(grid, float(dt), E)


# --- stepping ---------------------------------------------------------------

class EtdCoefficients:
    """Exponential time-differencing RK4 weights for the kinetic part.

    In the plane-wave basis the kinetic generator is diagonal on every
    component: ``-i|k|^2`` on ``phi``, ``-i(|k|^2 - |k'|^2)`` on ``gamma`` and
    ``-i(|k|^2 + |k'|^2)`` on ``sigma``. The phi-functions are evaluated by
    averaging over a circle of radius one around each ``z = h L`` to avoid
    cancellation near ``z = 0``.
    """

    def __init__(self, grid: TorusGrid, h: float, n_contour: int = 32):
        self.F = _plane_wave_basis(grid)
        k2 = laplacian_symbol(grid)
        gens = (-1j * k2, -1j * (k2[:, None] - k2[None, :]), -1j * (k2[:, None] + k2[None, :]))
        r = np.exp(2j * np.pi * (np.arange(n_contour) + 0.5) / n_contour)
        self.weights = []
        for L in gens:
            z = h * L
            Z = z[..., None] + r
            eZ = np.exp(Z)
            self.weights.append((
                np.exp(z),
                np.exp(0.5 * z),
                h * np.mean((np.exp(0.5 * Z) - 1.0) / Z, axis=-1),
                h * np.mean((-4.0 - Z + eZ * (4.0 - 3.0 * Z + Z * Z)) / Z ** 3, axis=-1),
                h * np.mean((2.0 + Z + eZ * (Z - 2.0)) / Z ** 3, axis=-1),
                h * np.mean((-4.0 - 3.0 * Z - Z * Z + eZ * (4.0 - Z)) / Z ** 3, axis=-1),
            ))

    def to_modes(self, c, G, S):
        Fh = self.F.conj().T
        return Fh @ c, Fh @ G @ self.F, Fh @ S @ self.F.conj()

    def from_modes(self, c, G, S):
        F = self.F
        return F @ c, F @ G @ F.conj().T, F @ S @ F.T


def _etdrk4(coef: EtdCoefficients, nonlinear, y):
    W = coef.weights

    def N(z):
        return coef.to_modes(*nonlinear(coef.from_modes(*z)))

    u = coef.to_modes(*y)
    Nu = N(u)
    a = tuple(w[1] * x + w[2] * n for w, x, n in zip(W, u, Nu))
    Na = N(a)
    b = tuple(w[1] * x + w[2] * n for w, x, n in zip(W, u, Na))
    Nb = N(b)
    c = tuple(w[1] * x + w[2] * (2.0 * nb - n) for w, x, nb, n in zip(W, a, Nb, Nu))
    Nc = N(c)
    out = tuple(w[0] * x + w[3] * n0 + 2.0 * w[4] * (na + nb) + w[5] * nc
                for w, x, n0, na, nb, nc in zip(W, u, Nu, Na, Nb, Nc))
    return coef.from_modes(*out)


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(tuple(a + 0.5 * dt * b for a, b in zip(y, k1)))
    k3 = f(tuple(a + 0.5 * dt * b for a, b in zip(y, k2)))
    k4 = f(tuple(a + dt * b for a, b in zip(y, k3)))
    return tuple(a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


class Stepper:
    """Reusable single-step integrator on the matrix form."""

    def __init__(self, pot: PotentialPair, V, cfg: IntegratorConfig):
        self.mf = MeanField(pot, V)
        self.cfg = cfg
        if cfg.scheme == STRANG_SPLIT:
            self.half = linear_propagator(0.5 * cfg.dt, pot.grid, self.mf.V)
        elif cfg.scheme == ETDRK4:
            self.etd = EtdCoefficients(pot.grid, cfg.dt)

    def step(self, y):
        dt = self.cfg.dt
        mf = self.mf
        if self.cfg.scheme == RK4:
            out = _rk4(lambda z: rhs_matrices(mf, *z), y, dt)
        elif self.cfg.scheme == ETDRK4:
            out = _etdrk4(self.etd, lambda z: rhs_matrices(mf, *z, include_kinetic=False), y)
        else:
            z = self.half.apply_matrices(*y)
            z = _rk4(lambda w: rhs_matrices(mf, *w, include_kinetic=False), z, dt)
            out = self.half.apply_matrices(*z)
        if not all(np.all(np.isfinite(a)) for a in out):
            raise NumericalAbortError("non-finite values produced by the integrator")
        return out


def step(rho: QuasifreeState, pot: PotentialPair, V, cfg: IntegratorConfig) -> QuasifreeState:
    """Advance ``rho`` by one step ``cfg.dt`` of the configured scheme."""
    c, G, S = Stepper(pot, V, cfg).step(rho.matrices())
    return QuasifreeState.from_matrices(rho.grid, c, G, S)


# --- trajectories -------------------------------------------------------------

CSV_COLUMNS = ("t", "N", "E", "min_eig_Gamma", "herm_violation", "symm_violation")


@dataclass
class Trajectory:
    """Observable log of every step plus state snapshots every ``output_stride`` steps."""

    grid: TorusGrid
    times: list = field(default_factory=list)
    number: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    min_eig: list = field(default_factory=list)
    herm: list = field(default_factory=list)
    symm: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list, repr=False)

    def record(self, t, mf, c, G, S, keep_snapshot: bool):
        self.times.append(float(t))
        self.number.append(particle_number_matrices(c, G))
        self.energy.append(energy_matrices(mf, c, G, S).real)
        gam = gamma_block_matrix(G, S)
        self.min_eig.append(float(np.linalg.eigvalsh(0.5 * (gam + gam.conj().T))[0]))
        self.herm.append(float(np.max(np.abs(G - G.conj().T))))
        self.symm.append(float(np.max(np.abs(S - S.T))))
        if keep_snapshot:
            self.snapshot_times.append(float(t))
            self.snapshots.append((c.copy(), G.copy(), S.copy()))

    def state(self, i: int) -> QuasifreeState:
        return QuasifreeState.from_matrices(self.grid, *self.snapshots[i])

    @property
    def final(self) -> QuasifreeState:
        return self.state(-1)

    def relative_drift(self, series: str) -> float:
        vals = np.asarray(getattr(self, series))
        ref = abs(vals[0]) if vals[0] != 0 else 1.0
        return float(np.max(np.abs(vals - vals[0])) / ref)

    def rows(self):
        return zip(self.times, self.number, self.energy, self.min_eig, self.herm, self.symm)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow([f"{x:.17g}" for x in row])


Observer = Callable[[float, QuasifreeState], None]


def evolve(rho0: QuasifreeState, pot: PotentialPair, V, cfg: IntegratorConfig,
           observers: Sequence[Observer] = (), check_initial: bool = True) -> Trajectory:
    """Integrate from ``rho0`` up to ``cfg.t_final`` with fixed steps.

    Raises
    ------
    InadmissibleStateError
        If ``rho0`` fails the admissibility checks.
    NumericalAbortError
        On non-finite values or when the Hermiticity, symmetry or positivity
        violation exceeds :data:`VIOLATION_CEILING`.
    """
    grid = rho0.grid
    if check_initial:
        report = admissibility_from_matrices(*rho0.matrices()[1:])
        if not report.admissible:
            raise InadmissibleStateError(f"initial state is not admissible: {report}")
    stepper = Stepper(pot, V, cfg)
    traj = Trajectory(grid)
    y = rho0.matrices()
    n_steps = cfg.n_steps
    for i in range(n_steps + 1):
        t = i * cfg.dt
        keep = (i % cfg.output_stride == 0) or i == n_steps
        traj.record(t, stepper.mf, *y, keep_snapshot=keep)
        viol = max(traj.herm[-1], traj.symm[-1], -traj.min_eig[-1])
        if viol > VIOLATION_CEILING:
            raise NumericalAbortError(
                f"admissibility violation {viol:.3e} at t={t:.6g} exceeds {VIOLATION_CEILING}")
        if observers:
            rho = QuasifreeState.from_matrices(grid, *y)
            for obs in observers:
                obs(t, rho)
        if i == n_steps:
            break
        y = stepper.step(y)
        if cfg.repair_drift:
            G, S, _ = repair_matrices(y[1], y[2])
            y = (y[0], G, S)
    return traj


def lambda_path_from_trajectory(traj: Trajectory, pot: PotentialPair, V,
                                cfg: IntegratorConfig, atol: float = 1e-12):
    """Block-Hamiltonian path ``t -> Lambda(Gamma_t)`` along a stored trajectory.

    At snapshot times the stored state is used. Between snapshots the state is
    produced by one step of the trajectory's own scheme, started from the
    preceding snapshot, which keeps the path accurate to the integrator's
    order (a dense output) instead of interpolating.
    """
    from .symplectic import lambda_from_matrices

    mf = MeanField(pot, V)
    ts = np.asarray(traj.snapshot_times)
    steppers: dict[float, Stepper] = {}
    cache: dict[float, object] = {}

    def path(t: float):
        key = round(float(t), 12)
        if key in cache:
            return cache[key]
        i = int(np.searchsorted(ts, t + atol, side="right")) - 1
        if i < 0:
            raise ValueError(f"t={t} precedes the trajectory")
        gap = float(t - ts[i])
        if gap <= atol:
            y = traj.snapshots[i]
        else:
            if i == len(ts) - 1:
                raise ValueError(f"t={t} is past the last snapshot")
            h = round(gap, 12)
            if h not in steppers:
                steppers[h] = Stepper(pot, V, IntegratorConfig(dt=h, scheme=cfg.scheme))
            y = steppers[h].step(traj.snapshots[i])
        if len(cache) > 16:
            cache.clear()
        cache[key] = lambda_from_matrices(mf, *y)
        return cache[key]

    return path
