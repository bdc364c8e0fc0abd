"""Hartree-Fock-Bogoliubov dynamics of quasifree Bose states on a periodic grid.

Submodules
----------
grid          torus grid, spectral transforms, grid fields and kernels
states        quasifree states, admissibility, Wick expectations, snapshots
meanfield     the mean-field operators ``h``, ``b`` and ``k``
dynamics      HFB right-hand side, integrators and trajectories
observables   particle number, energy and the symplectic energy functional
symplectic    Bogoliubov maps, their evolution and the diagonalization flow
bogoliubov    translation-invariant quasiparticle modes
gibbs         Gibbs fixed points and the thermodynamic limit
cli           command-line front end
"""
from .grid import GridField, GridKernel, TorusGrid, make_grid
from .states import (InadmissibleStateError, QuasifreeState, check_admissible, load_state,
                     save_state, wick_expectation)
from .meanfield import MeanField, PotentialPair
from .dynamics import IntegratorConfig, NumericalAbortError, Trajectory, evolve, hfb_rhs
from .observables import energy, hamiltonian_functional, particle_number
from .symplectic import Symplectomorphism, diagonalize_gamma, evolve_symplectomorphism
from .gibbs import GibbsParams, critical_density, solve_mu_L, thermodynamic_sweep
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "GibbsParams",
    "GridField",
    "GridKernel",
    "InadmissibleStateError",
    "IntegratorConfig",
    "MeanField",
    "NumericalAbortError",
    "PotentialPair",
    "QuasifreeState",
    "Symplectomorphism",
    "TorusGrid",
    "Trajectory",
    "check_admissible",
    "critical_density",
    "diagonalize_gamma",
    "energy",
    "evolve",
    "evolve_symplectomorphism",
    "hamiltonian_functional",
    "hfb_rhs",
    "load_state",
    "make_grid",
    "particle_number",
    "save_state",
    "solve_mu_L",
    "thermodynamic_sweep",
    "wick_expectation",
]
