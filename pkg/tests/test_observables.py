import numpy as np
import pytest
from hypothesis import given, strategies as st

from bosehfb.grid import GridField, GridKernel, make_grid, plane_wave
from bosehfb.meanfield import MeanField, PotentialPair
from bosehfb.observables import (energy, energy_complex, energy_contact_form, gradient_check,
                                 hamiltonian_functional, hamiltonian_gradients, reconstruct)
from bosehfb.observables import particle_number
from bosehfb.states import QuasifreeState, sample_random_state
from bosehfb.symplectic import diagonalize_gamma, random_symplectomorphism


@pytest.fixture
def grid():
    return make_grid(1, 8, 1.5)


def gaussian_pot(grid, V=None):
    r2 = np.sum(grid.positions ** 2, axis=1)
    return PotentialPair.grid_function(grid, 0.8 * np.exp(-r2), V)


def with_phi(grid, values):
    vac = QuasifreeState.vacuum(grid)
    return QuasifreeState(GridField(grid, values), vac.gamma, vac.sigma)


def test_number_examples(grid):
    assert particle_number(QuasifreeState.vacuum(grid)) == 0.0
    rho = with_phi(grid, np.full(grid.n_sites, 0.6 - 0.8j))
    assert particle_number(rho) == pytest.approx(grid.volume)


@given(st.integers(0, 10_000))
def test_number_matches_eigen_sum(seed):
    grid = make_grid(1, 6, 1.0)
    rho = sample_random_state(grid, seed, 0.4)
    c, G, _ = rho.matrices()
    assert particle_number(rho) == pytest.approx(np.sum(np.linalg.eigvalsh(G)) + np.vdot(c, c).real,
                                                 rel=1e-12)


def test_energy_vacuum_and_free_plane_wave(grid):
    pot = PotentialPair.grid_function(grid, np.zeros(grid.n_sites))
    assert energy(QuasifreeState.vacuum(grid), pot) == 0.0
    rho = with_phi(grid, plane_wave(grid, [2]).values / np.sqrt(grid.volume))
    k2 = (2 * np.pi / grid.half_length) ** 2
    assert energy(rho, pot) == pytest.approx(k2 * particle_number(rho), rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_contact_energy_forms_agree(seed, grid):
    rho = sample_random_state(grid, seed, 0.4)
    V = np.cos(grid.positions[:, 0])
    pot = PotentialPair.contact(grid, 1.7, V)
    assert energy(rho, pot) == pytest.approx(energy_contact_form(rho, pot), rel=1e-12)


def test_contact_form_requires_contact(grid):
    with pytest.raises(ValueError):
        energy_contact_form(QuasifreeState.vacuum(grid), gaussian_pot(grid))


@given(st.integers(0, 10_000))
def test_energy_real(seed):
    grid = make_grid(1, 6, 1.2)
    rho = sample_random_state(grid, seed, 0.5)
    e = energy_complex(rho, gaussian_pot(grid, np.sin(grid.positions[:, 0])))
    assert abs(e.imag) <= 1e-12 * max(1.0, abs(e))


@pytest.mark.parametrize("theta", [np.pi / 7, np.pi / 3])
def test_energy_gauge_invariance(theta, grid):
    rho = sample_random_state(grid, 2, 0.5)
    pot = gaussian_pot(grid)
    c, G, S = rho.matrices()
    rot = QuasifreeState.from_matrices(grid, np.exp(1j * theta) * c, G, np.exp(2j * theta) * S)
    assert energy(rot, pot) == pytest.approx(energy(rho, pot), rel=1e-12)


def test_functional_with_trivial_map(grid):
    rho = sample_random_state(grid, 3, 0.4)
    c, G, _ = rho.matrices()
    pot = gaussian_pot(grid)
    n = grid.n_sites
    val = hamiltonian_functional(rho.phi, np.eye(n), np.zeros((n, n)), G, pot)
    no_pairing = QuasifreeState.from_matrices(grid, c, G, np.zeros_like(G))
    assert val == pytest.approx(energy(no_pairing, pot), rel=1e-12)
    assert hamiltonian_functional(np.zeros(n), np.eye(n), np.zeros((n, n)), np.zeros((n, n)),
                                  pot) == 0.0


@pytest.mark.parametrize("mode", ["contact", "grid"])
def test_functional_equals_energy_under_reconstruction(mode, grid):
    rho = sample_random_state(grid, 4, 0.4)
    c, G, S = rho.matrices()
    pot = PotentialPair.contact(grid, 1.2) if mode == "contact" else gaussian_pot(grid)
    d = diagonalize_gamma(G, S)
    W = d.U.adjoint()
    # Gamma = W* diag(g', 1 + conj g') W, the functional's convention
    G2, S2 = reconstruct(W.u, W.v, d.gamma_prime)
    assert np.allclose(G2, G, atol=1e-8) and np.allclose(S2, S, atol=1e-8)
    val = hamiltonian_functional(c, W.u, W.v, d.gamma_prime, pot)
    ref = energy(QuasifreeState.from_matrices(grid, c, G2, S2), pot)
    assert val == pytest.approx(ref, rel=1e-10)


def test_functional_rejects_non_symplectic(grid):
    n = grid.n_sites
    with pytest.raises(ValueError):
        hamiltonian_functional(np.zeros(n), 2 * np.eye(n), np.zeros((n, n)), np.zeros((n, n)),
                               gaussian_pot(grid))


def test_gradients_vanish_at_zero(grid):
    n = grid.n_sites
    mf = MeanField(gaussian_pot(grid))
    grads = hamiltonian_gradients(mf, np.zeros(n), np.zeros((n, n)), np.zeros((n, n)),
                                  np.zeros((n, n)))
    for gr in grads:
        assert not np.any(gr)


@pytest.mark.parametrize("mode", ["contact", "grid"])
@pytest.mark.parametrize("seed", range(2))
def test_gradients_match_finite_differences(mode, seed):
    grid = make_grid(1, 4, 1.0)
    rng = np.random.default_rng(seed)
    n = grid.n_sites
    U = random_symplectomorphism(n, rng, 0.4)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    gp = 0.3 * A @ A.conj().T / n
    phi = 0.5 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    V = rng.standard_normal(n)
    pot = PotentialPair.contact(grid, 0.9, V) if mode == "contact" else gaussian_pot(grid, V)
    rep = gradient_check(phi, U.u, U.v, gp, pot)
    assert rep.max_deviation <= 1e-6


def test_gradients_in_condensate_limit():
    grid = make_grid(1, 4, 1.0)
    rng = np.random.default_rng(5)
    n = grid.n_sites
    U = random_symplectomorphism(n, rng, 0.3)
    phi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    rep = gradient_check(phi, U.u, U.v, 1e-9 * np.eye(n), PotentialPair.contact(grid, 1.0))
    assert rep.max_deviation <= 1e-6
