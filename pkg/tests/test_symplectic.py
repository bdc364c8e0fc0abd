import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from bosehfb.dynamics import ETDRK4, IntegratorConfig, evolve, hfb_rhs, lambda_path_from_trajectory
from bosehfb.grid import make_grid
from bosehfb.meanfield import PotentialPair
from bosehfb.states import (InadmissibleStateError, QuasifreeState, build_gamma_matrix,
                            gamma_block_matrix, sample_random_state, squeezed_state)
from bosehfb.symplectic import (BlockHamiltonian, Symplectomorphism, check_symplectic,
                                diagonalize_gamma, evolve_symplectomorphism, gamma_form_rhs,
                                lambda_of_state, lambda_path_from_snapshots,
                                random_block_hamiltonian, random_symplectomorphism,
                                transport_residual)


def random_unitary(n, rng):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def test_identity_and_single_mode_maps():
    assert check_symplectic(Symplectomorphism.identity(5)) == 0.0
    n, r = 4, 0.7
    e = np.zeros(n)
    e[1] = 1.0
    P = np.outer(e, e)
    U = Symplectomorphism(np.eye(n) + (np.cosh(r) - 1) * P, np.sinh(r) * P)
    assert check_symplectic(U) <= 1e-14


def test_non_symplectic_pair_detected(rng):
    n = 4
    U = Symplectomorphism(rng.standard_normal((n, n)), rng.standard_normal((n, n)))
    assert check_symplectic(U) > 0.1


@given(st.integers(0, 10_000), st.floats(0.05, 1.5))
def test_random_maps_are_symplectic(seed, scale):
    U = random_symplectomorphism(5, np.random.default_rng(seed), scale)
    assert check_symplectic(U) <= 1e-10 * max(1.0, np.linalg.norm(U.matrix(), 2) ** 2)
    Sd = np.diag(np.r_[np.ones(5), -np.ones(5)])
    M = U.matrix()
    assert np.allclose(M @ Sd @ M.conj().T, Sd, atol=1e-9)
    assert np.allclose(U.inverse().matrix() @ M, np.eye(10), atol=1e-9)
    assert np.allclose(U.adjoint().matrix(), M.conj().T)


def test_hilbert_schmidt_report(rng):
    U = random_symplectomorphism(4, rng, 0.5)
    assert U.hilbert_schmidt_v() == pytest.approx(np.linalg.norm(U.v))


def test_lambda_examples():
    grid = make_grid(1, 8, 1.0)
    zero = PotentialPair.grid_function(grid, np.zeros(grid.n_sites))
    lam = lambda_of_state(QuasifreeState.vacuum(grid), zero)
    from bosehfb.grid import kinetic_matrix
    assert np.allclose(lam.a, kinetic_matrix(grid))
    assert not np.any(lam.b)
    pot = PotentialPair.contact(grid, 1.0)
    c, G, S = sample_random_state(grid, 1, 0.3).matrices()
    hf = QuasifreeState.from_matrices(grid, np.zeros_like(c), G, np.zeros_like(S))
    assert not np.any(lambda_of_state(hf, pot).b)
    lam = lambda_of_state(sample_random_state(grid, 2, 0.3), pot)
    assert lam.structure_violation() <= 1e-12


def test_gamma_form_zero_lambda():
    grid = make_grid(1, 6, 1.0)
    gm = build_gamma_matrix(sample_random_state(grid, 1, 0.3))
    n = grid.n_sites
    assert not np.any(gamma_form_rhs(gm, BlockHamiltonian(np.zeros((n, n)), np.zeros((n, n)))))


@pytest.mark.parametrize("mode", ["contact", "grid"])
def test_gamma_form_matches_hfb_rhs(mode):
    grid = make_grid(1, 8, 1.5)
    r2 = np.sum(grid.positions ** 2, axis=1)
    pot = (PotentialPair.contact(grid, 1.1) if mode == "contact"
           else PotentialPair.grid_function(grid, np.exp(-r2)))
    rho = sample_random_state(grid, 5, 0.3)
    lam = lambda_of_state(rho, pot)
    _, G, S = rho.matrices()
    i_dGamma = gamma_form_rhs(gamma_block_matrix(G, S), lam)
    r = hfb_rhs(rho, pot)
    n = grid.n_sites
    assert np.allclose(-1j * i_dGamma[:n, :n], r.dgamma.matrix(), atol=1e-11)
    assert np.allclose(-1j * i_dGamma[:n, n:], r.dsigma.matrix(), atol=1e-11)


def test_gamma_form_stationary_diagonal():
    n = 5
    a = np.diag(np.arange(n, dtype=float))
    gp = np.diag(np.linspace(0.1, 0.5, n))
    Gam = gamma_block_matrix(gp, np.zeros((n, n)))
    assert np.allclose(gamma_form_rhs(Gam, BlockHamiltonian(a, np.zeros((n, n)))), 0)


def test_evolution_under_zero_lambda(rng):
    n = 4
    U0 = random_symplectomorphism(n, rng, 0.4)
    zero = BlockHamiltonian(np.zeros((n, n)), np.zeros((n, n)))
    traj = evolve_symplectomorphism(U0, lambda t: zero, 0.1, 1.0)
    assert np.allclose(traj.final.matrix(), U0.matrix(), atol=1e-14)


@pytest.mark.parametrize("scheme", ["magnus4", "rk4"])
def test_constant_lambda_closed_form(scheme, rng):
    n = 4
    lam = random_block_hamiltonian(n, rng, 1.0)
    diag = BlockHamiltonian(lam.a, np.zeros((n, n)))
    for L in (diag, lam):
        traj = evolve_symplectomorphism(Symplectomorphism.identity(n), lambda t: L, 0.01, 1.0,
                                        scheme)
        W = expm(L.generator() * 1.0)
        assert np.allclose(traj.final.adjoint().matrix(), W, atol=1e-8)
        assert traj.max_violation <= 1e-8
    # diagonal Lambda keeps v = 0 and u a pure phase
    traj = evolve_symplectomorphism(Symplectomorphism.identity(n), lambda t: diag, 0.01, 1.0)
    assert np.max(np.abs(traj.final.v)) <= 1e-14
    assert np.allclose(traj.final.u, expm(1j * lam.a), atol=1e-10)


def test_evolution_rejects_bad_start():
    n = 3
    bad = Symplectomorphism(2 * np.eye(n), np.zeros((n, n)))
    zero = BlockHamiltonian(np.zeros((n, n)), np.zeros((n, n)))
    with pytest.raises(ValueError):
        evolve_symplectomorphism(bad, lambda t: zero, 0.1, 1.0)
    with pytest.raises(ValueError):
        evolve_symplectomorphism(Symplectomorphism.identity(n), lambda t: zero, 0.1, 1.0, "euler")


def test_transport_along_hfb_path_converges():
    grid = make_grid(1, 16, np.pi)
    pot = PotentialPair.contact(grid, 1.0)
    rho = sample_random_state(grid, 3, 0.2, cutoff=2)
    _, G, S = rho.matrices()
    d = diagonalize_gamma(G, S)
    U0 = d.U.adjoint()
    G0p = gamma_block_matrix(d.gamma_prime, np.zeros_like(G))
    res = []
    for dt in (0.04, 0.02, 0.01):
        cfg = IntegratorConfig(dt, ETDRK4, 0.4)
        traj = evolve(rho, pot, None, cfg)
        st_ = evolve_symplectomorphism(U0, lambda_path_from_trajectory(traj, pot, None, cfg), dt, 0.4)
        assert st_.max_violation <= 1e-8
        res.append(transport_residual(st_.final, gamma_block_matrix(*traj.snapshots[-1][1:]), G0p))
    assert res[0] / res[1] > 10 and res[1] / res[2] > 10


def test_snapshot_path_exact_nodes_only():
    grid = make_grid(1, 6, 1.0)
    pot = PotentialPair.contact(grid, 1.0)
    snaps = [sample_random_state(grid, s, 0.2).matrices() for s in range(3)]
    path = lambda_path_from_snapshots([0.0, 0.1, 0.2], snaps, pot)
    assert np.allclose(path(0.1).matrix(), lambda_of_state(
        QuasifreeState.from_matrices(grid, *snaps[1]), pot).matrix())
    with pytest.raises(ValueError):
        path(0.05)


def test_diagonalize_without_pairing(rng):
    n = 5
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    G = A @ A.conj().T / n
    res = diagonalize_gamma(G, np.zeros((n, n)))
    assert res.converged_time == 0.0
    assert np.allclose(res.gamma_prime, G, atol=1e-12)
    assert np.allclose(res.U.matrix(), np.eye(2 * n))


def test_diagonalize_squeezed_state():
    grid = make_grid(1, 8, 1.0)
    r = 0.6
    _, G, S = squeezed_state(grid, r).matrices()
    res = diagonalize_gamma(G, S)
    assert np.max(np.abs(res.spectrum())) <= 1e-8
    assert res.residual <= 1e-7
    e0 = np.full(grid.n_sites, 1 / np.sqrt(grid.n_sites))
    u00 = e0 @ res.U.u @ e0
    v00 = e0 @ res.U.v @ e0
    assert abs(u00) == pytest.approx(np.cosh(r), abs=1e-7)
    assert abs(v00) == pytest.approx(np.sinh(r), abs=1e-7)
    assert check_symplectic(res.U) <= 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_diagonalize_random_state(seed):
    grid = make_grid(1, 8, 1.0)
    _, G, S = sample_random_state(grid, seed, 0.5).matrices()
    tol = 1e-8
    res = diagonalize_gamma(G, S, tol)
    s0 = res.sigma_norms[0]
    for t in (1.0, 2.0, 3.0):
        assert res.sigma_norm_at(t) <= 1.05 * s0 * np.exp(-t)
    assert res.residual <= 10 * tol
    # 0 <= gamma' <= gamma
    assert np.linalg.eigvalsh(res.gamma_prime).min() >= -1e-12
    assert np.linalg.eigvalsh(G - res.gamma_prime).min() >= -1e-9
    # uniqueness up to a unitary
    Q = random_unitary(grid.n_sites, np.random.default_rng(seed + 100))
    rot = diagonalize_gamma(Q @ G @ Q.conj().T, Q @ S @ Q.T, tol)
    assert np.allclose(np.sort(rot.spectrum()), np.sort(res.spectrum()), atol=1e-8)


def test_diagonalize_monotone_in_psd_order():
    """Stopping earlier (larger tol) leaves a larger gamma_t."""
    grid = make_grid(1, 6, 1.0)
    _, G, S = sample_random_state(grid, 4, 0.5).matrices()
    results = [diagonalize_gamma(G, S, tol) for tol in (1e-1, 1e-3, 1e-6)]
    times = [r.converged_time for r in results]
    assert times == sorted(times)
    for early, late in zip(results, results[1:]):
        assert np.linalg.eigvalsh(early.gamma_prime - late.gamma_prime).min() >= -1e-9


def test_diagonalize_errors():
    grid = make_grid(1, 6, 1.0)
    n = grid.n_sites
    with pytest.raises(InadmissibleStateError):
        diagonalize_gamma(np.zeros((n, n)), 0.1 * np.eye(n))
    _, G, S = sample_random_state(grid, 1, 0.5).matrices()
    with pytest.raises(RuntimeError):
        diagonalize_gamma(G, S, 1e-8, t_max=0.5)
    res = diagonalize_gamma(G, S)
    with pytest.raises(ValueError):
        res.sigma_norm_at(0.01)
