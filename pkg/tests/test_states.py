import numpy as np
import pytest
from hypothesis import given, strategies as st

from bosehfb.grid import GridField, GridKernel, make_grid
from bosehfb.states import (ANNIHILATE as A, CREATE as C, FORMAT_VERSION, InadmissibleStateError,
                            QuasifreeState, build_gamma_matrix, check_admissible, load_state,
                            repair_state, sample_random_state, save_state, squeezed_state,
                            wick_expectation)

from oracles import FockGaussian, all_monomials, wick_partition_oracle


@pytest.fixture
def grid():
    return make_grid(1, 8, 2.0)


def test_vacuum_admissible(grid):
    rep = check_admissible(QuasifreeState.vacuum(grid))
    assert rep.admissible
    assert rep.max_violation() == 0.0


def test_squeezed_state_saturates_schur(grid):
    rep = check_admissible(squeezed_state(grid, 0.8))
    assert rep.admissible
    assert rep.schur <= 1e-12


def test_pairing_without_density_rejected(grid):
    S = 0.1 * np.eye(grid.n_sites)
    rho = QuasifreeState.from_matrices(grid, np.zeros(grid.n_sites), np.zeros_like(S), S)
    rep = check_admissible(rho)
    assert not rep.admissible
    assert rep.schur > 0


def test_non_hermitian_gamma_rejected(grid):
    r = np.random.default_rng(0)
    G = r.standard_normal((grid.n_sites,) * 2)
    rho = QuasifreeState.from_matrices(grid, np.zeros(grid.n_sites), G, np.zeros_like(G))
    assert check_admissible(rho).hermiticity > 0
    with pytest.raises(InadmissibleStateError):
        build_gamma_matrix(rho)


def test_gamma_matrix_of_vacuum(grid):
    blocks = build_gamma_matrix(QuasifreeState.vacuum(grid)).blocks
    n = grid.n_sites
    expected = np.zeros((2 * n, 2 * n))
    expected[n:, n:] = np.eye(n) / grid.cell_volume
    assert np.allclose(blocks, expected)


def test_gamma_matrix_positive(grid):
    assert build_gamma_matrix(squeezed_state(grid, 1.1)).min_eigenvalue() >= -1e-10
    gm = build_gamma_matrix(sample_random_state(grid, 4, 0.5))
    assert gm.min_eigenvalue() >= -1e-10
    assert gm.hermiticity() <= 1e-12


@given(st.integers(0, 2 ** 31), st.floats(0.01, 1.0), st.sampled_from([None, 1, 2]))
def test_random_states_admissible(seed, scale, cutoff):
    g = make_grid(1, 6, 1.0)
    assert check_admissible(sample_random_state(g, seed, scale, cutoff)).admissible


def test_random_state_scale_zero_is_vacuum(grid):
    rho = sample_random_state(grid, 3, 0.0)
    for arr in rho.matrices():
        assert not np.any(arr)


def test_random_state_deterministic(grid):
    a = sample_random_state(grid, 11, 0.3, cutoff=2)
    b = sample_random_state(grid, 11, 0.3, cutoff=2)
    for x, y in zip(a.matrices(), b.matrices()):
        assert np.array_equal(x, y)


def test_vacuum_two_point_functions(grid):
    vac = QuasifreeState.vacuum(grid)
    assert wick_expectation(vac, [(1, C), (1, A)]) == 0
    assert wick_expectation(vac, [(2, A), (2, C)]) == pytest.approx(1.0 / grid.cell_volume)
    assert wick_expectation(vac, [(2, A), (3, C)]) == 0


def test_odd_correlators_vanish_without_condensate(grid):
    rho = sample_random_state(grid, 5, 0.4)
    c, G, S = rho.matrices()
    rho0 = QuasifreeState.from_matrices(grid, np.zeros_like(c), G, S)
    for ops in all_monomials(3, 3):
        assert wick_expectation(rho0, ops) == 0


def test_conjugation_relation(grid):
    rho = sample_random_state(grid, 6, 0.4)
    for x in range(3):
        for y in range(3):
            lhs = wick_expectation(rho, [(x, C), (y, C)])
            rhs = np.conj(wick_expectation(rho, [(y, A), (x, A)]))
            assert lhs == pytest.approx(rhs, abs=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_wick_matches_partition_oracle(seed):
    g = make_grid(1, 4, 1.0)
    rho = sample_random_state(g, seed, 0.5)
    phi, gam, sig = rho.phi.values, rho.gamma.values, rho.sigma.values
    for length in (1, 2, 3, 4):
        for ops in all_monomials(3, length):
            ref = wick_partition_oracle(phi, gam, sig, g.cell_volume, ops)
            got = wick_expectation(rho, ops)
            assert abs(got - ref) <= 1e-11 * max(1.0, abs(ref))


def test_wick_matches_fock_space_gaussian():
    """Moments of an explicit two-mode Gaussian density matrix (cell volume 1)."""
    A_ = np.array([[3.0, 0.4 - 0.3j], [0.4 + 0.3j, 3.5]])
    B_ = np.array([[0.8, 0.3j], [0.3j, -0.6]])
    fock = FockGaussian(A_, B_, [0.3 - 0.1j, -0.2j], cutoff=20)
    phi, gam, sig = fock.moments()
    g2 = make_grid(1, 2, 1.0)
    rho = QuasifreeState.from_matrices(g2, phi, gam, sig)
    assert check_admissible(rho).admissible
    for length in (2, 3, 4):
        for ops in all_monomials(2, length):
            assert abs(wick_expectation(rho, ops) - fock.moment(ops)) <= 1e-9


def test_wick_input_validation(grid):
    rho = QuasifreeState.vacuum(grid)
    with pytest.raises(ValueError):
        wick_expectation(rho, [(0, A)] * 5)
    with pytest.raises(ValueError):
        wick_expectation(rho, [(0, "x")])
    with pytest.raises(IndexError):
        wick_expectation(rho, [(grid.n_sites, A)])


def test_snapshot_round_trip(tmp_path, grid):
    rho = sample_random_state(grid, 9, 0.2)
    path = tmp_path / "s.npz"
    save_state(path, rho)
    back = load_state(path)
    assert back.grid == grid
    for x, y in zip(rho.matrices(), back.matrices()):
        assert np.array_equal(x, y)
    with np.load(path) as data:
        assert int(data["format_version"]) == FORMAT_VERSION


def test_snapshot_version_checked(tmp_path, grid):
    path = tmp_path / "bad.npz"
    np.savez(path, format_version=np.array(99), dim=1, points_per_side=8, half_length=2.0,
             phi=np.zeros(8), gamma=np.zeros((8, 8)), sigma=np.zeros((8, 8)))
    with pytest.raises(ValueError):
        load_state(path)


def test_repair_is_explicit(grid):
    n = grid.n_sites
    G = np.diag(np.linspace(-1e-6, 0.1, n))
    S = np.zeros((n, n))
    S[0, 1] = 1e-9
    rho = QuasifreeState.from_matrices(grid, np.zeros(n), G, S)
    assert not check_admissible(rho).admissible
    fixed, clipped = repair_state(rho)
    assert clipped == pytest.approx(1e-6)
    _, G2, S2 = fixed.matrices()
    assert np.linalg.eigvalsh(G2).min() >= 0
    assert np.array_equal(S2, S2.T)


def test_components_must_share_grid():
    g1, g2 = make_grid(1, 4, 1.0), make_grid(1, 4, 2.0)
    with pytest.raises(ValueError):
        QuasifreeState(GridField(g1, np.zeros(4)), GridKernel.zeros(g2), GridKernel.zeros(g1))
