import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bosehfb.bogoliubov import (GAPLESS, STABLE, UNSTABLE, assemble_from_modes, bogoliubov_modes,
                                default_constants, diagonal_densities, eigen_residual,
                                mode_functions, modes_symplectomorphism, modes_to_csv,
                                normalization_defect, solve_mode)
from bosehfb.grid import laplacian_symbol, make_grid
from bosehfb.symplectic import check_symplectic


def bose_occupations(modes, beta=1.0):
    E = np.array([m.E for m in modes])
    return np.where(E > 0, 1.0 / np.expm1(beta * np.where(E > 0, E, 1.0)), 0.0)


def test_no_pairing():
    m = solve_mode(2.5, 0.0)
    assert m.E == 2.5 and m.u == 1.0 and m.v == 0.0


def test_two_by_two_closed_form():
    m = solve_mode(2.0, 1.0)
    assert m.E == pytest.approx(np.sqrt(3.0), rel=1e-15)
    assert normalization_defect(m) <= 1e-14
    assert eigen_residual(m, 2.0, 1.0) <= 1e-14


def test_gapless_and_unstable_flags():
    assert solve_mode(1.0, 1.0).status == GAPLESS
    m = solve_mode(1.0, 2.0)
    assert m.status == UNSTABLE
    assert m.growth_rate == pytest.approx(np.sqrt(3.0))
    assert np.isnan(m.u)


@given(st.floats(0.01, 50.0), st.floats(0.0, 0.99), st.floats(0.0, 2 * np.pi))
def test_stable_modes_normalized(a, ratio, phase):
    b = ratio * a * np.exp(1j * phase)
    m = solve_mode(a, b)
    assert m.status == STABLE
    assert normalization_defect(m) <= 1e-10
    assert eigen_residual(m, a, b) <= 1e-10 * max(1.0, a)


def test_default_constants_gapless_at_zero():
    c_h, c_k = default_constants(1.3, 1.0, 0.8)
    assert c_h == pytest.approx(0.8) and c_k == pytest.approx(0.8)
    grid = make_grid(1, 8, 2.0)
    modes = bogoliubov_modes(1.3, 1.0, 0.8, grid)
    statuses = [m.status for m in modes]
    assert statuses.count(GAPLESS) == 1 and statuses.count(STABLE) == grid.n_sites - 1
    # the phonon branch E ~ sqrt(k^2 (k^2 + 2 g n0))
    k2 = laplacian_symbol(grid)
    E = np.array([m.E for m in modes])
    assert np.allclose(E, np.sqrt(k2 * (k2 + 1.6)), atol=1e-12)


def test_explicit_constants_unstable_band():
    grid = make_grid(1, 8, 2.0)
    modes = bogoliubov_modes(1.0, 1.0, 1.0, grid, c_h=-0.5, c_k=0.2)
    assert any(m.status == UNSTABLE for m in modes)


@pytest.mark.parametrize("dim,N", [(1, 16), (2, 8)])
def test_mode_map_symplectic(dim, N):
    grid = make_grid(dim, N, 1.5)
    U = modes_symplectomorphism(bogoliubov_modes(1.2, 1.0, 1.0, grid), grid)
    assert check_symplectic(U) <= 1e-12


@pytest.mark.parametrize("dim,N", [(1, 16), (2, 8)])
def test_reconstruction_round_trip(dim, N):
    grid = make_grid(dim, N, 1.5)
    modes = bogoliubov_modes(1.2, 1.0, 1.0, grid)
    U = modes_symplectomorphism(modes, grid)
    occ = bose_occupations(modes)
    G, S = assemble_from_modes(U, grid, occ)
    g, s = diagonal_densities(*mode_functions(U, grid), occ)
    dv = grid.cell_volume
    assert np.max(np.abs(g - np.diagonal(G) / dv)) <= 1e-10
    assert np.max(np.abs(s - np.diagonal(S) / dv)) <= 1e-10
    assert np.max(np.abs(s)) > 1e-3


def test_stationary_phases_leave_diagonals_fixed():
    grid = make_grid(2, 8, 1.5)
    modes = bogoliubov_modes(1.2, 1.0, 1.0, grid)
    U = modes_symplectomorphism(modes, grid)
    occ = bose_occupations(modes)
    E = [m.E for m in modes]
    ref = diagonal_densities(*mode_functions(U, grid), occ)
    for t in (0.3, 1.7, 10.0):
        now = diagonal_densities(*mode_functions(U, grid, t, E), occ)
        for a, b in zip(now, ref):
            assert np.max(np.abs(a - b)) <= 1e-10


def test_modes_csv(tmp_path):
    grid = make_grid(2, 4, 1.0)
    modes = bogoliubov_modes(1.2, 1.0, 1.0, grid)
    path = tmp_path / "modes.csv"
    modes_to_csv(modes, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["kx", "ky", "E", "re_u", "im_u", "re_v", "im_v", "stable_flag"]
    assert len(rows) == grid.n_sites + 1
    assert float(rows[2][2]) == modes[1].E
    zero = next(i for i, m in enumerate(modes) if not np.any(m.k))
    assert rows[zero + 1][-1] == GAPLESS
