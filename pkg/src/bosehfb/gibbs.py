"""Translation- and gauge-invariant Gibbs fixed point on the torus.

With ``phi = 0``, ``sigma = 0`` and a contact coupling ``g``, the one-body
density matrix is diagonal in plane waves with occupations
``gamma_hat(k) = 1 / (exp(beta (|k|^2 + g n - mu)) - 1)``. The density ``n`` is
an input and ``mu`` the unknown, fixed by ``n = S_L(mu)``.

Everything is expressed through the positive shift ``s = g n - mu``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from . import kernels
from .grid import TorusGrid, make_grid
from .states import QuasifreeState

ZETA_TERMS = 20000


@dataclass(frozen=True)
class GibbsParams:
    beta: float
    n: float
    g: float
    grid: TorusGrid

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.n > 0:
            raise ValueError(f"density must be positive, got {self.n}")
        if self.g < 0:
            raise ValueError(f"coupling must be >= 0, got {self.g}")

    @property
    def gn(self) -> float:
        return self.g * self.n

    def with_grid(self, grid: TorusGrid) -> GibbsParams:
        return GibbsParams(self.beta, self.n, self.g, grid)

    def with_density(self, n: float) -> GibbsParams:
        return GibbsParams(self.beta, n, self.g, self.grid)


@dataclass(frozen=True)
class GibbsSolution:
    """Finite-volume fixed point.

    ``gamma_hat`` is indexed like ``grid.modes``; ``condensate_fraction`` is
    the zero-mode share ``gamma_hat(0) / (|Lambda| n)``.
    """

    params: GibbsParams
    mu: float
    shift: float
    gamma_hat: np.ndarray = field(repr=False)
    density_check: float
    condensate_fraction: float
    iterations: int


def _mode_k2(grid: TorusGrid) -> np.ndarray:
    """``|k|^2`` for every mode, built by broadcasting (no ``(N^d, d)`` table)."""
    axis = (np.pi / grid.half_length * np.arange(-grid.points_per_side // 2,
                                                  grid.points_per_side // 2)) ** 2
    k2 = axis
    for _ in range(grid.dim - 1):
        k2 = (k2[..., None] + axis).reshape(-1)
    return np.ascontiguousarray(k2.reshape(-1))


def lattice_sum(mu: float, params: GibbsParams, k2: np.ndarray | None = None) -> float:
    """``S_L(mu) = |Lambda|^{-1} sum_k 1 / (exp(beta (|k|^2 + g n - mu)) - 1)``.

    Raises
    ------
    ValueError
        If ``mu >= g n`` (the zero mode diverges).
    """
    shift = params.gn - mu
    if not shift > 0:
        raise ValueError(f"mu={mu} must be below g*n={params.gn}")
    k2 = _mode_k2(params.grid) if k2 is None else k2
    return kernels.bose_sum(k2, params.beta, shift) / params.grid.volume


def solve_mu_L(params: GibbsParams, tol: float = 1e-12, max_iter: int = 400) -> GibbsSolution:
    """Chemical potential with ``|S_L(mu) - n| <= tol n``, by bracketing bisection.

    The bisection runs on ``log(g n - mu)``: near condensation ``mu`` sits
    within ``~1 / (beta n |Lambda|)`` of ``g n`` and a linear bracket would
    lose those digits.
    """
    grid = params.grid
    k2 = _mode_k2(grid)
    vol = grid.volume
    beta, n = params.beta, params.n
    weights = kernels.BoseWeights.build(k2, beta)

    def excess(log_s: float) -> float:
        return weights.sum(math.exp(log_s)) / vol - n

    # S decreases in the shift: find lo (S > n) and hi (S < n)
    lo = hi = math.log(1.0 / beta)
    f = excess(lo)
    while f <= 0:
        lo -= 2.0
        f = excess(lo)
        if lo < -700:
            raise RuntimeError("could not bracket the chemical potential from above")
    hi = lo
    while excess(hi) >= 0:
        hi += 2.0
        if hi > 700:
            raise RuntimeError("could not bracket the chemical potential from below")
    it = 0
    mid = 0.5 * (lo + hi)
    while it < max_iter:
        mid = 0.5 * (lo + hi)
        f = excess(mid)
        if abs(f) <= tol * n or hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
        if f > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    shift = math.exp(mid)
    mu = params.gn - shift
    with np.errstate(over="ignore"):
        ghat = 1.0 / np.expm1(beta * (k2 + shift))
    dens = weights.sum(shift) / vol
    zero = 1.0 / math.expm1(beta * shift)
    return GibbsSolution(params, mu, shift, ghat, dens, zero / (vol * n), it)


def zeta(s: float, terms: int = ZETA_TERMS) -> float:
    """Riemann zeta for ``s > 1`` by direct summation plus an Euler-Maclaurin tail.

    The tail ``sum_{k > M} k^{-s}`` is ``int_M^inf x^{-s} dx`` corrected by the
    first Euler-Maclaurin terms; with ``M = 20000`` the error is far below
    ``1e-15`` for ``s >= 3/2``.
    """
    if not s > 1:
        raise ValueError(f"zeta series needs s > 1, got {s}")
    M = terms
    k = np.arange(1, M, dtype=float)
    head = math.fsum(k ** (-s))
    tail = (M ** (1 - s) / (s - 1) + 0.5 * M ** (-s) + s * M ** (-s - 1) / 12.0
            - s * (s + 1) * (s + 2) * M ** (-s - 3) / 720.0)
    return head + tail


def critical_density(beta: float, d: int) -> float:
    """``n_c = (2 pi)^{-d} int dk / (exp(beta |k|^2) - 1) = zeta(d/2) (4 pi beta)^{-d/2}``.

    Raises
    ------
    ValueError
        For ``d < 3`` (the integral diverges).
    """
    if d < 3:
        raise ValueError(f"critical density requires d >= 3, got d={d}")
    if not beta > 0:
        raise ValueError("beta must be positive")
    return zeta(0.5 * d) * (4.0 * math.pi * beta) ** (-0.5 * d)


def condensate_fraction(params: GibbsParams) -> float:
    """Thermodynamic-limit condensate share ``max(0, n - n_c) / n``."""
    nc = critical_density(params.beta, params.grid.dim)
    return max(0.0, params.n - nc) / params.n


def _unit_sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (0.5 * d) / math.gamma(0.5 * d)


def continuum_sum(mu: float, params: GibbsParams, epsrel: float = 1e-12) -> float:
    """``S_inf(mu) = (2 pi)^{-d} int dk / (exp(beta (|k|^2 + g n - mu)) - 1)``.

    Reduced to the radial integral in ``k`` and evaluated by adaptive
    quadrature; the integrand is bounded at ``k = 0`` even for ``mu = g n``
    when ``d >= 3``.
    """
    d = params.grid.dim
    if d < 3:
        raise ValueError(f"continuum sum requires d >= 3, got d={d}")
    shift = params.gn - mu
    if shift < 0:
        raise ValueError(f"mu={mu} exceeds g*n={params.gn}")
    beta = params.beta

    def integrand(k):
        x = beta * (k * k + shift)
        if x == 0.0:
            return 0.0 if d > 3 else 1.0 / beta
        if x > 700:
            return 0.0
        return k ** (d - 1) / math.expm1(x)

    kmax = math.sqrt(800.0 / beta)
    edges = [0.0] + [kmax * f for f in (0.05, 0.15, 0.3, 0.5, 0.75)] + [kmax]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=epsrel, limit=400)
        total += val
    return _unit_sphere_area(d) / (2.0 * math.pi) ** d * total


def solve_mu_infinity(params: GibbsParams, tol: float = 1e-13) -> float:
    """``mu_inf`` with ``S_inf(mu_inf) = n`` below ``n_c``; ``g n`` at or above it."""
    nc = critical_density(params.beta, params.grid.dim)
    if params.n >= nc:
        return params.gn

    def f(log_s):
        return continuum_sum(params.gn - math.exp(log_s), params) - params.n

    lo = -40.0
    hi = 0.0
    while f(hi) > 0:
        hi += 2.0
    log_s = brentq(f, lo, hi, xtol=tol, rtol=1e-15, maxiter=500)
    return params.gn - math.exp(log_s)


def points_for_cutoff(L: float, beta: float, beta_k2_max: float = 40.0) -> int:
    """Even ``N`` whose largest axis mode satisfies ``beta (pi N / 2L)^2 >= beta_k2_max``."""
    return 2 * math.ceil(L * math.sqrt(beta_k2_max / beta) / math.pi)


@dataclass
class SweepRow:
    L: float
    N: int
    mu_L: float
    n_check: float
    zero_mode_fraction: float
    s_inf_residual: float


@dataclass
class SweepResult:
    rows: list
    n_c: float | None
    mu_infinity: float | None
    condensate_fraction_predicted: float | None
    params: dict

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["L", "N", "mu_L", "n_check", "zero_mode_fraction", "s_inf_residual"])
            for r in self.rows:
                w.writerow([f"{r.L:.17g}", r.N] + [f"{x:.17g}" for x in
                           (r.mu_L, r.n_check, r.zero_mode_fraction, r.s_inf_residual)])

    def summary(self) -> dict:
        last = self.rows[-1] if self.rows else None
        return {
            "params": self.params,
            "n_c": self.n_c,
            "mu_infinity": self.mu_infinity,
            "condensate_fraction_predicted": self.condensate_fraction_predicted,
            "zero_mode_fraction_largest_L": None if last is None else last.zero_mode_fraction,
            "largest_L": None if last is None else last.L,
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def thermodynamic_sweep(params: GibbsParams, L_list, tol: float = 1e-12,
                        points_per_side=None, beta_k2_max: float = 40.0) -> SweepResult:
    """Solve the fixed point for each box size ``L`` (ascending).

    ``points_per_side`` may be a single int, a list matching ``L_list`` or
    ``None``; in the last case ``N`` follows :func:`points_for_cutoff` so the
    truncated mode sum resolves the Bose tail.
    """
    L_list = [float(L) for L in L_list]
    if any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must be strictly ascending")
    d = params.grid.dim
    if points_per_side is None:
        Ns = [points_for_cutoff(L, params.beta, beta_k2_max) for L in L_list]
    elif isinstance(points_per_side, int):
        Ns = [points_per_side] * len(L_list)
    else:
        Ns = [int(x) for x in points_per_side]
    condensing = d >= 3
    nc = critical_density(params.beta, d) if condensing else None
    mu_inf = solve_mu_infinity(params) if condensing else None
    rows = []
    for L, N in zip(L_list, Ns):
        p = params.with_grid(make_grid(d, N, L))
        sol = solve_mu_L(p, tol)
        resid = continuum_sum(sol.mu, p) - p.n if condensing else float("nan")
        rows.append(SweepRow(L, N, sol.mu, sol.density_check, sol.condensate_fraction, resid))
    info = {"beta": params.beta, "n": params.n, "g": params.g, "d": d, "tol": tol}
    return SweepResult(rows, nc, mu_inf,
                       condensate_fraction(params) if condensing else None, info)


def gibbs_state(solution: GibbsSolution) -> QuasifreeState:
    """``phi = 0``, ``sigma = 0`` and ``gamma = sum_k gamma_hat(k) |e_k><e_k|``."""
    grid = solution.params.grid
    F = np.exp(1j * grid.positions @ grid.modes.T) / np.sqrt(grid.n_sites)
    G = (F * solution.gamma_hat) @ F.conj().T
    G = 0.5 * (G + G.conj().T)
    return QuasifreeState.from_matrices(grid, np.zeros(grid.n_sites), G,
                                        np.zeros_like(G))


def mode_occupations(G: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Diagonal of ``gamma`` in the plane-wave basis."""
    F = np.exp(1j * grid.positions @ grid.modes.T) / np.sqrt(grid.n_sites)
    return np.real(np.einsum("ik,ij,jk->k", F.conj(), G, F))
