"""Symplectomorphisms, the block Hamiltonian and the two flows built on them.

A symplectomorphism is stored through its blocks ``(u, v)``; the full matrix
is ``[[u, v], [conj v, conj u]]`` and preserves ``S = diag(1, -1)``. All
matrices are operator matrices in the orthonormal site basis.

Two conventions meet here and both are kept:

* :func:`evolve_symplectomorphism` transports ``Gamma_t = U_t* Gamma'_0 U_t``,
  i.e. it integrates ``i dW/dt = S Lambda W`` for ``W = U*``;
* :func:`diagonalize_gamma` returns ``U`` with ``Gamma = U diag(g', 1 + conj g') U*``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .grid import GridKernel
from .meanfield import MeanField, PotentialPair
from .states import (GeneralizedDensityMatrix, InadmissibleStateError, QuasifreeState,
                     admissibility_from_matrices, gamma_block_matrix)

IDENTITY_TOL = 1e-10
VIOLATION_CEILING = 1e-6
MAGNUS4 = "magnus4"
RK4 = "rk4"


@dataclass(frozen=True, eq=False)
class Symplectomorphism:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        v = np.asarray(self.v, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape != v.shape:
            raise ValueError(f"blocks must be square and equal-sized, got {u.shape}, {v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def size(self) -> int:
        return self.u.shape[0]

    def matrix(self) -> np.ndarray:
        return np.block([[self.u, self.v], [self.v.conj(), self.u.conj()]])

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> Symplectomorphism:
        n = m.shape[0] // 2
        return cls(m[:n, :n], m[:n, n:])

    @classmethod
    def identity(cls, n: int) -> Symplectomorphism:
        return cls(np.eye(n), np.zeros((n, n)))

    def adjoint(self) -> Symplectomorphism:
        """``U*`` (again of block form, with blocks ``u*`` and ``v^T``)."""
        return Symplectomorphism(self.u.conj().T, self.v.T)

    def inverse(self) -> Symplectomorphism:
        """``U^{-1} = S U* S``."""
        return Symplectomorphism(self.u.conj().T, -self.v.T)

    def hilbert_schmidt_v(self) -> float:
        """``||v||_HS``; finite norm is the implementability condition."""
        return float(np.linalg.norm(self.v))


def check_symplectic(U: Symplectomorphism) -> float:
    """Largest residual norm of the four defining identities."""
    u, v = U.u, U.v
    eye = np.eye(U.size)
    uh, vh = u.conj().T, v.conj().T
    res = (
        u @ uh - v @ vh - eye,
        uh @ u - v.T @ v.conj() - eye,
        uh @ v - v.T @ u.conj(),
        u @ v.T - v @ u.T,
    )
    return float(max(np.linalg.norm(r, 2) for r in res))


def _symplectic_violation_matrix(W: np.ndarray) -> float:
    return check_symplectic(Symplectomorphism.from_matrix(W))


@dataclass(frozen=True, eq=False)
class BlockHamiltonian:
    """``Lambda = [[a, b], [conj b, conj a]]`` with ``a`` Hermitian and ``b`` symmetric."""

    a: np.ndarray
    b: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.block([[self.a, self.b], [self.b.conj(), self.a.conj()]])

    def structure_violation(self) -> float:
        return float(max(np.max(np.abs(self.a - self.a.conj().T), initial=0.0),
                         np.max(np.abs(self.b - self.b.T), initial=0.0)))

    def generator(self) -> np.ndarray:
        """``-i S Lambda``, so that ``dW/dt = generator @ W``."""
        n = self.a.shape[0]
        lam = self.matrix()
        lam[n:] *= -1.0
        return -1j * lam


def lambda_from_matrices(mf: MeanField, c, G, S) -> BlockHamiltonian:
    a = mf.h(G + np.outer(c, c.conj()))
    b = mf.k(S + np.outer(c, c))
    return BlockHamiltonian(a, b)


def lambda_of_state(rho: QuasifreeState, pot: PotentialPair, V=None) -> BlockHamiltonian:
    """``a = h(gamma + |phi><phi|)`` and ``b = k(sigma + phi (x) phi)`` as matrices."""
    return lambda_from_matrices(MeanField(pot, V), *rho.matrices())


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, GeneralizedDensityMatrix):
        return x.matrix()
    if isinstance(x, BlockHamiltonian):
        return x.matrix()
    if isinstance(x, GridKernel):
        return x.matrix()
    return np.asarray(x, dtype=complex)


def gamma_form_rhs(Gamma, Lam) -> np.ndarray:
    """``i dGamma/dt = S Lambda Gamma - Gamma Lambda S`` (operator-matrix form)."""
    gam = _as_matrix(Gamma)
    lam = _as_matrix(Lam)
    n = gam.shape[0] // 2
    s = np.concatenate([np.ones(n), -np.ones(n)])
    prod = lam @ gam
    return s[:, None] * prod - (gam @ lam) * s[None, :]


# --- evolution along a Lambda path -------------------------------------------

@dataclass
class SymplecticTrajectory:
    times: list = field(default_factory=list)
    maps: list = field(default_factory=list, repr=False)
    violations: list = field(default_factory=list)

    @property
    def final(self) -> Symplectomorphism:
        return self.maps[-1]

    @property
    def max_violation(self) -> float:
        return max(self.violations)


LambdaPath = Callable[[float], BlockHamiltonian]


def _magnus4_step(path: LambdaPath, t: float, h: float) -> np.ndarray:
    A0 = path(t).generator()
    A1 = path(t + 0.5 * h).generator()
    A2 = path(t + h).generator()
    omega = h / 6.0 * (A0 + 4.0 * A1 + A2) - h * h / 12.0 * (A0 @ A2 - A2 @ A0)
    return expm(omega)


def _rk4_step(path: LambdaPath, t: float, h: float, W: np.ndarray) -> np.ndarray:
    A0 = path(t).generator()
    A1 = path(t + 0.5 * h).generator()
    A2 = path(t + h).generator()
    k1 = A0 @ W
    k2 = A1 @ (W + 0.5 * h * k1)
    k3 = A1 @ (W + 0.5 * h * k2)
    k4 = A2 @ (W + h * k3)
    return W + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve_symplectomorphism(U0: Symplectomorphism, lambda_path: LambdaPath, dt: float,
                             T: float, scheme: str = MAGNUS4) -> SymplecticTrajectory:
    """Integrate ``i d(U_t*)/dt = S Lambda(t) U_t*`` from ``U0`` up to ``T``.

    Parameters
    ----------
    lambda_path
        Callable returning the block Hamiltonian at time ``t``. Both schemes
        sample it at ``t``, ``t + dt/2`` and ``t + dt``.
    scheme
        ``"magnus4"`` (fourth-order Magnus, exact exponentials, default) or
        ``"rk4"``.

    Raises
    ------
    ValueError
        If ``U0`` is not symplectic to ``1e-10``.
    NumericalAbortError
        If the identity violation exceeds :data:`VIOLATION_CEILING`.
    """
    from .dynamics import NumericalAbortError

    if check_symplectic(U0) > IDENTITY_TOL * max(1.0, np.linalg.norm(U0.matrix(), 2) ** 2):
        raise ValueError("initial map is not symplectic")
    if scheme not in (MAGNUS4, RK4):
        raise ValueError(f"unknown scheme {scheme!r}")
    n_steps = int(round(T / dt))
    W = U0.adjoint().matrix()
    traj = SymplecticTrajectory()
    traj.times.append(0.0)
    traj.maps.append(U0)
    traj.violations.append(check_symplectic(U0))
    for i in range(n_steps):
        t = i * dt
        if scheme == MAGNUS4:
            W = _magnus4_step(lambda_path, t, dt) @ W
        else:
            W = _rk4_step(lambda_path, t, dt, W)
        if not np.all(np.isfinite(W)):
            raise NumericalAbortError(f"non-finite symplectomorphism at t={t + dt:.6g}")
        U = Symplectomorphism.from_matrix(W).adjoint()
        viol = check_symplectic(U)
        if viol > VIOLATION_CEILING:
            raise NumericalAbortError(
                f"symplectic violation {viol:.3e} at t={t + dt:.6g} exceeds {VIOLATION_CEILING}")
        traj.times.append((i + 1) * dt)
        traj.maps.append(U)
        traj.violations.append(viol)
    return traj


def lambda_path_from_snapshots(times, snapshots, pot: PotentialPair, V=None,
                               atol: float = 1e-9) -> LambdaPath:
    """Block-Hamiltonian path through stored ``(c, G, S)`` snapshots.

    Requested times must coincide with snapshot times (to ``atol``); other
    times raise, since interpolation would lower the order of the transport.
    """
    mf = MeanField(pot, V)
    ts = np.asarray(times, dtype=float)
    cache: dict[int, BlockHamiltonian] = {}

    def path(t: float) -> BlockHamiltonian:
        i = int(np.argmin(np.abs(ts - t)))
        if abs(ts[i] - t) > atol:
            raise ValueError(f"no snapshot at t={t}")
        if i not in cache:
            if len(cache) > 8:
                cache.clear()
            cache[i] = lambda_from_matrices(mf, *snapshots[i])
        return cache[i]

    return path


def transport_residual(U: Symplectomorphism, Gamma_t, Gamma0p) -> float:
    """``||W^{-1} Gamma_t W^{-*} - Gamma'_0||`` with ``W = U*`` (spectral norm).

    Zero exactly when ``Gamma_t = U* Gamma'_0 U``.
    """
    W_inv = U.adjoint().inverse().matrix()
    back = W_inv @ _as_matrix(Gamma_t) @ W_inv.conj().T
    return float(np.linalg.norm(back - _as_matrix(Gamma0p), 2))


# --- diagonalization flow ---------------------------------------------------

@dataclass
class DiagonalizationResult:
    """Output of :func:`diagonalize_gamma`.

    ``gamma_prime`` is an operator matrix with ``0 <= gamma_prime <= gamma``;
    ``U`` satisfies ``Gamma = U diag(gamma', 1 + conj gamma') U*`` up to
    ``residual`` (spectral norm).
    """

    gamma_prime: np.ndarray
    U: Symplectomorphism
    residual: float
    clipped: float
    times: np.ndarray
    sigma_norms: np.ndarray
    converged_time: float

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.gamma_prime)

    def sigma_norm_at(self, t: float) -> float:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise ValueError(f"t={t} is not a logged time")
        return float(self.sigma_norms[i])


def _pairing_expm(h: float, s: np.ndarray) -> np.ndarray:
    """``exp(-h B)`` for ``B = [[0, s], [conj s, 0]]`` with ``s`` symmetric.

    Even powers of ``B`` are ``diag(P^k, conj P^k)`` with ``P = s conj(s)``
    Hermitian and positive, so one ``n x n`` eigendecomposition of ``P``
    gives ``cosh(h sqrt P)`` and ``sinh(h sqrt P) / sqrt P``.
    """
    P = s @ s.conj()
    w, q = np.linalg.eigh(0.5 * (P + P.conj().T))
    r = np.sqrt(np.clip(w, 0.0, None))
    hr = h * r
    small = hr < 1e-8
    f = np.where(small, h * (1.0 + hr * hr / 6.0), np.sinh(hr) / np.where(small, 1.0, r))
    qh = q.conj().T
    C = (q * np.cosh(hr)) @ qh
    X = -((q * f) @ qh) @ s
    return np.block([[C, X], [X.conj(), C.conj()]])


def _pairing_block(Gamma: np.ndarray, n: int) -> np.ndarray:
    sig = Gamma[:n, n:]
    return 0.5 * (sig + sig.T)


def _off_diag_norm(Gamma: np.ndarray, n: int) -> float:
    return float(np.linalg.norm(Gamma[:n, n:]))


def diagonalize_gamma(gamma, sigma, tol: float = 1e-8, dt: float = 0.05,
                      t_max: float | None = None) -> DiagonalizationResult:
    """Remove the pairing part of ``Gamma`` by the contracting flow.

    Along ``dGamma/dt = -(B Gamma + Gamma B)`` with ``B = [[0, s], [conj s, 0]]``
    and ``s`` the current off-diagonal block, ``gamma`` decreases and ``sigma``
    decays at least like ``exp(-t)``. The flow is ``Gamma_t = V_t Gamma V_t*``
    with ``dV/dt = -B V``; it is integrated by a fourth-order commutator-free
    Lie-group scheme so that every ``V_t`` is exactly symplectic, and
    ``U = V_inf^{-1}``.

    Parameters
    ----------
    gamma, sigma
        Operator matrices (or :class:`GridKernel` values, converted).
    tol
        Stop once ``||sigma_t||_HS < tol`` and the reconstruction residual
        is below ``tol``.
    t_max
        Defaults to ``ln(||sigma_0|| / tol) + 10 + 2 ||sigma_0||``.

    Raises
    ------
    InadmissibleStateError
        If ``Gamma`` is not positive.
    RuntimeError
        If the stopping test is not met by ``t_max``.
    """
    G = _as_matrix(gamma)
    S = _as_matrix(sigma)
    report = admissibility_from_matrices(G, S)
    if not report.admissible:
        raise InadmissibleStateError(f"Gamma is not admissible: {report}")
    n = G.shape[0]
    G = 0.5 * (G + G.conj().T)
    S = 0.5 * (S + S.T)
    Gamma0 = gamma_block_matrix(G, S)
    s0 = _off_diag_norm(Gamma0, n)
    if t_max is None:
        t_max = (np.log(s0 / tol) if s0 > tol else 0.0) + 10.0 + 2.0 * s0
    Sdiag = np.concatenate([np.ones(n), -np.ones(n)])

    def transported(V):
        return V @ Gamma0 @ V.conj().T

    def residual_of(V, Gam):
        U = Sdiag[:, None] * V.conj().T * Sdiag[None, :]
        off = np.zeros_like(Gam)
        off[:n, n:] = Gam[:n, n:]
        off[n:, :n] = Gam[n:, :n]
        return float(np.linalg.norm(U @ off @ U.conj().T, 2))

    V = np.eye(2 * n, dtype=complex)
    Gam = Gamma0
    times = [0.0]
    norms = [s0]
    t = 0.0
    residual = residual_of(V, Gam)
    n_max = int(np.ceil(t_max / dt))
    step = 0
    while not (norms[-1] < tol and residual <= tol):
        if step >= n_max:
            raise RuntimeError(
                f"diagonalization flow did not converge by t={t:.3g}: "
                f"||sigma||={norms[-1]:.3e}, residual={residual:.3e}")
        h = dt
        K1 = _pairing_block(Gam, n)
        Y2 = _pairing_expm(0.5 * h, K1) @ V
        K2 = _pairing_block(transported(Y2), n)
        Y3 = _pairing_expm(0.5 * h, K2) @ V
        K3 = _pairing_block(transported(Y3), n)
        Y4 = _pairing_expm(h, K3 - 0.5 * K1) @ Y2
        K4 = _pairing_block(transported(Y4), n)
        V = (_pairing_expm(h, 0.25 * K1 + K2 / 6 + K3 / 6 - K4 / 12)
             @ _pairing_expm(h, -K1 / 12 + K2 / 6 + K3 / 6 + 0.25 * K4) @ V)
        step += 1
        t = step * dt
        Gam = transported(V)
        times.append(t)
        norms.append(_off_diag_norm(Gam, n))
        # the spectral norm is only needed once the HS test has passed
        residual = residual_of(V, Gam) if norms[-1] < tol else np.inf

    gp = Gam[:n, :n]
    gp = 0.5 * (gp + gp.conj().T)
    w, q = np.linalg.eigh(gp)
    clipped = float(max(0.0, -w.min())) if w.size else 0.0
    gp = (q * np.clip(w, 0.0, None)) @ q.conj().T
    U_mat = Sdiag[:, None] * V.conj().T * Sdiag[None, :]
    U = Symplectomorphism.from_matrix(U_mat)
    D = gamma_block_matrix(gp, np.zeros((n, n)))
    final_res = float(np.linalg.norm(Gamma0 - U_mat @ D @ U_mat.conj().T, 2))
    return DiagonalizationResult(gp, U, final_res, clipped, np.asarray(times),
                                 np.asarray(norms), t)


# --- random maps ------------------------------------------------------------

def random_block_hamiltonian(n: int, rng: np.random.Generator, scale: float = 1.0,
                             projector: np.ndarray | None = None) -> BlockHamiltonian:
    def cnormal():
        return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2 * n)

    a = cnormal()
    a = scale * 0.5 * (a + a.conj().T)
    b = cnormal()
    b = scale * 0.5 * (b + b.T)
    if projector is not None:
        P = projector
        a = P @ a @ P.conj().T
        b = P @ b @ P.T
    return BlockHamiltonian(a, b)


def random_symplectomorphism(n: int, rng: np.random.Generator, scale: float = 1.0,
                             projector: np.ndarray | None = None) -> Symplectomorphism:
    """``exp(-i S Lambda)`` for a random block Hamiltonian of size ``scale``."""
    lam = random_block_hamiltonian(n, rng, scale, projector)
    return Symplectomorphism.from_matrix(expm(lam.generator()))
