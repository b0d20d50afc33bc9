import numpy as np
import pytest

from latmem.bloch import solve_bloch
from latmem.kernel import ControlPulse, KernelGrids, build_kernel, optimal_efficiency
from latmem.observables import compute_observables
from latmem.scenario import CellGrid, Modulation, Scenario, build_cell, derive_params, potential


@pytest.fixture(scope="session")
def raman():
    return Scenario.preset("raman")


@pytest.fixture(scope="session")
def eit():
    return Scenario.preset("eit")


def uniform_cell(scenario):
    """Uniform-ensemble (m = 1) problem for a scenario."""
    p = derive_params(scenario)
    grid = CellGrid.for_scenario(scenario)
    m = Modulation(grid=grid, samples=np.ones(grid.n))
    return p, grid, m, potential(m.samples, p)


def solve_point(scenario, tol=1e-11):
    """Mode + observables at the scenario's lattice constant."""
    p = derive_params(scenario)
    grid, m, v, _ = build_cell(scenario)
    mode = solve_bloch(v, p.k_s, scenario.a, tol=tol, grid=grid)
    return p, grid, m, v, mode, compute_observables(mode, m, p)


def kernel_at(scenario, obs=None):
    """Kernel matrix and efficiency result at the scenario's point."""
    p = derive_params(scenario)
    if obs is None:
        obs = solve_point(scenario)[5]
    pulse = ControlPulse.for_scenario(scenario)
    grids = KernelGrids.for_scenario(scenario)
    K = build_kernel(p, obs, pulse, grids)
    return p, obs, pulse, grids, K, optimal_efficiency(K)
