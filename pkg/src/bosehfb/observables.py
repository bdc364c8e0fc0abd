"""Particle number, energy and the symplectic energy functional with its gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridField
from .meanfield import MeanField, PotentialPair
from .states import QuasifreeState

SYMPLECTIC_TOL = 1e-8


def particle_number_matrices(c: np.ndarray, G: np.ndarray) -> float:
    return float(np.real(np.trace(G)) + np.vdot(c, c).real)


def particle_number(rho: QuasifreeState) -> float:
    """``int (gamma(x; x) + |phi(x)|^2) dx``."""
    dv = rho.grid.cell_volume
    total = dv * np.sum(np.diagonal(rho.gamma.values) + np.abs(rho.phi.values) ** 2)
    return float(total.real)


def pairing_energy(mf: MeanField, Sp: np.ndarray) -> complex:
    """``1/2 int int v(x - y) |Sp(x, y)|^2`` for the operator matrix ``Sp``."""
    if mf.contact:
        return 0.5 * mf.g * mf.inv_dv * np.sum(np.abs(np.diagonal(Sp)) ** 2)
    return 0.5 * np.sum(mf.vdisp * np.abs(Sp) ** 2)


def energy_matrices(mf: MeanField, c, G, S) -> complex:
    cc = np.outer(c, c.conj())
    Sp = S + np.outer(c, c)
    e = np.trace(mf.h0 @ (G + cc))
    e += np.trace(mf.b(cc) @ G)
    e += 0.5 * np.trace(mf.b(G) @ G)
    e += pairing_energy(mf, Sp)
    return complex(e)


def energy(rho: QuasifreeState, pot: PotentialPair, V=None) -> float:
    """Energy of a quasifree state (real part; see :func:`energy_complex`)."""
    return energy_complex(rho, pot, V).real


def energy_complex(rho: QuasifreeState, pot: PotentialPair, V=None) -> complex:
    mf = MeanField(pot, V)
    return energy_matrices(mf, *rho.matrices())


def energy_contact_form(rho: QuasifreeState, pot: PotentialPair, V=None) -> float:
    """Contact-interaction energy written with densities.

    ``Tr[h (gamma + |phi><phi|)] + g int (2 n |phi|^2 + n^2 + |w|^2 / 2)``
    with ``n = gamma(x; x)`` and ``w = sigma(x, x) + phi(x)^2``.
    """
    if pot.mode != "contact":
        raise ValueError("contact-form energy needs a contact interaction")
    mf = MeanField(pot, V)
    c, G, _ = rho.matrices()
    dv = rho.grid.cell_volume
    n = np.diagonal(rho.gamma.values).real
    phi = rho.phi.values
    w = np.diagonal(rho.sigma.values) + phi ** 2
    one_body = np.trace(mf.h0 @ (G + np.outer(c, c.conj()))).real
    local = np.sum(2.0 * n * np.abs(phi) ** 2 + n ** 2 + 0.5 * np.abs(w) ** 2) * dv
    return float(one_body + pot.coupling * local)


# --- symplectic energy functional ---------------------------------------------

def reconstruct(u, v, gamma0p):
    """``(gamma, sigma)`` operator matrices from ``Gamma = U* diag(g', 1 + conj g') U``."""
    one = np.eye(gamma0p.shape[0]) + gamma0p.conj()
    G = u.conj().T @ gamma0p @ u + v.T @ one @ v.conj()
    S = u.conj().T @ gamma0p @ v + v.T @ one @ u.conj()
    return G, S


def _symplectic_violation(u, v) -> float:
    from .symplectic import Symplectomorphism, check_symplectic
    return check_symplectic(Symplectomorphism(u, v))


def hamiltonian_matrices(mf: MeanField, c, u, v, gamma0p) -> float:
    G, S = reconstruct(u, v, gamma0p)
    cc = np.outer(c, c.conj())
    val = np.vdot(c, mf.h0 @ c)
    val += np.trace(G @ (mf.h0 + mf.b(cc)))
    val += 0.5 * np.trace(G @ mf.b(G))
    val += pairing_energy(mf, S + np.outer(c, c))
    return float(np.real(val))


def _as_coeffs(phi) -> np.ndarray:
    if isinstance(phi, GridField):
        return phi.coefficients()
    return np.asarray(phi, dtype=complex)


def hamiltonian_functional(phi, u, v, gamma0p, pot: PotentialPair, V=None,
                           check: bool = True) -> float:
    """Energy functional of ``(phi, u, v)`` at fixed diagonal occupation ``gamma0p``.

    ``u``, ``v`` and ``gamma0p`` are operator matrices; ``phi`` a
    :class:`GridField` or orthonormal-basis coefficients. The pair ``(u, v)``
    enters through ``gamma = u* g' u + v^T (1 + conj g') conj v`` and
    ``sigma = u* g' v + v^T (1 + conj g') conj u``.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if check:
        viol = _symplectic_violation(u, v)
        if viol > SYMPLECTIC_TOL:
            raise ValueError(f"(u, v) is not symplectic: violation {viol:.3e}")
    return hamiltonian_matrices(MeanField(pot, V), _as_coeffs(phi), u, v,
                                np.asarray(gamma0p, dtype=complex))


def hamiltonian_gradients(mf: MeanField, c, u, v, gamma0p):
    """Closed-form Wirtinger gradients with respect to ``conj(phi)``, ``u*`` and ``v*``.

    Uses ``i du/dt = u h + v conj(k)`` and ``i dv/dt = -u k - v conj(h)`` with
    ``h = h(gamma + |phi><phi|)`` and ``k = k(sigma + phi (x) phi)``.
    """
    G, S = reconstruct(u, v, gamma0p)
    cc = np.outer(c, c.conj())
    h_t = mf.h(G + cc)
    k_t = mf.k(S + np.outer(c, c))
    i_dphi = mf.h(G) @ c + k_t @ c.conj()
    i_du = u @ h_t + v @ k_t.conj()
    i_dv = -u @ k_t - v @ h_t.conj()
    grad_phi = i_dphi
    grad_u = gamma0p @ i_du + 0.5 * v @ k_t.conj()
    grad_v = -gamma0p @ i_dv + v @ h_t.conj() + 0.5 * u @ k_t
    return grad_phi, grad_u, grad_v


def finite_difference_gradients(mf: MeanField, c, u, v, gamma0p, step: float = 1e-5):
    """Central-difference Wirtinger gradients ``(d/dRe + i d/dIm) / 2``."""
    def f(cc, uu, vv):
        return hamiltonian_matrices(mf, cc, uu, vv, gamma0p)

    def wirtinger(arr, evaluate):
        out = np.zeros(arr.shape, dtype=complex)
        for idx in np.ndindex(arr.shape):
            parts = []
            for direction in (1.0, 1j):
                plus = arr.copy()
                minus = arr.copy()
                plus[idx] += step * direction
                minus[idx] -= step * direction
                parts.append((evaluate(plus) - evaluate(minus)) / (2 * step))
            out[idx] = 0.5 * (parts[0] + 1j * parts[1])
        return out

    g_phi = wirtinger(c, lambda x: f(x, u, v))
    g_u = wirtinger(u, lambda x: f(c, x, v))
    g_v = wirtinger(v, lambda x: f(c, u, x))
    return g_phi, g_u, g_v


@dataclass(frozen=True)
class GradientReport:
    phi: float
    u: float
    v: float

    @property
    def max_deviation(self) -> float:
        return max(self.phi, self.u, self.v)


def _rel_dev(a, b) -> float:
    scale = max(np.max(np.abs(b), initial=0.0), np.max(np.abs(a), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - b)) / scale)


def gradient_check(phi, u, v, gamma0p, pot: PotentialPair, V=None,
                   step: float = 1e-5) -> GradientReport:
    """Compare finite-difference gradients of the functional with the closed forms."""
    mf = MeanField(pot, V)
    c = _as_coeffs(phi)
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    gp = np.asarray(gamma0p, dtype=complex)
    exact = hamiltonian_gradients(mf, c, u, v, gp)
    fd = finite_difference_gradients(mf, c, u, v, gp, step)
    return GradientReport(*(_rel_dev(a, b) for a, b in zip(fd, exact)))
