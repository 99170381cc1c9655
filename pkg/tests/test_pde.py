import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import exp1

from blowuplab.nonlin import BUILTIN_NAMES, make_builtin
from blowuplab.pde import (InstabilityError, RadialGrid, RadialSolver, RadialState, ResolutionExhausted,
                           diagnostics, make_initial_data, run_to_cap)
from blowuplab.resolvent import ResolventTable


@pytest.fixture(scope="module")
def pure_exp_run():
    fam = make_builtin("pure_exp")
    table = ResolventTable(fam)
    grid = RadialGrid.make(1, 1.0, 800)
    u = make_initial_data(grid, "bump", 4.0).u
    return run_to_cap(RadialState(grid, u), RadialSolver(grid, fam, table), 20.0), table


# -- grid and operator ----------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_laplacian_exact_on_quadratics(n):
    grid = RadialGrid.make(n, 1.0, 200)
    lap = grid.apply_laplacian(grid.nodes**2)
    np.testing.assert_allclose(lap[:-1], 2.0 * n, rtol=1e-9)


def test_origin_row_is_2n_times_difference_quotient():
    grid = RadialGrid.make(3, 1.0, 100)
    u = np.random.default_rng(1).normal(size=grid.J + 1)
    h0 = grid.nodes[1]
    assert grid.apply_laplacian(u)[0] == pytest.approx(6.0 * (u[1] - u[0]) / h0**2, rel=1e-12)


def test_grid_validation():
    with pytest.raises(ValueError):
        RadialGrid.make(1, 1.0, 4)
    with pytest.raises(ValueError):
        RadialGrid.make(1, 1.0, 16)  # beta = 12 grades too fast for 16 cells
    with pytest.raises(ValueError):
        RadialGrid.make(1, -1.0, 100)
    with pytest.raises(ValueError):
        RadialGrid.make(1, 1.0, 100, bc="periodic")


def test_refined_halves_spacings():
    g = RadialGrid.make(1, 1.0, 400)
    f = g.refined()
    assert f.J == 800
    np.testing.assert_allclose(f.nodes[::2], g.nodes, rtol=1e-12, atol=1e-15)


# -- initial data ---------------------------------------------------------------


def test_bump_data_and_monotone_in_time_flag():
    fam = make_builtin("pure_exp")
    grid = RadialGrid.make(1, 1.0, 400, beta=2.0)
    data = make_initial_data(grid, "bump", 4.0, fam=fam, check_monotone_in_time=True)
    np.testing.assert_allclose(data.u, 4.0 * (1 - grid.nodes**2), atol=1e-14)
    # discrete Laplacian is exact on quadratics: -8 + e^4 at the centre
    res0 = grid.apply_laplacian(data.u)[0] + math.exp(4.0)
    assert res0 == pytest.approx(math.exp(4.0) - 8.0, rel=1e-9)
    # near r = 1 the residual is about -8 + 1, so the full sweep reports fail
    assert not data.monotone_in_time
    r_last = grid.nodes[-2]
    assert data.residual_min == pytest.approx(-8.0 + math.exp(4.0 * (1 - r_last**2)), rel=1e-9)


def test_small_bump_monotone_in_time():
    fam = make_builtin("pure_exp")
    grid = RadialGrid.make(1, 1.0, 400, beta=2.0)
    data = make_initial_data(grid, "bump", 0.1, fam=fam, check_monotone_in_time=True)
    assert data.monotone_in_time
    # Lap u0 = -0.2 everywhere; e^{u0} is smallest at the last interior node
    r_last = grid.nodes[-2]
    assert data.residual_min == pytest.approx(-0.2 + math.exp(0.1 * (1 - r_last**2)), rel=1e-9)


def test_constant_and_plateau_data():
    grid = RadialGrid.make(2, 1.0, 100)
    assert np.all(make_initial_data(grid, "constant", 2.0).u == 2.0)
    p = make_initial_data(grid, "plateau", 3.0, r0=0.5).u
    assert np.all(p[grid.nodes <= 0.5] == 3.0) and p[-1] == 0.0
    assert np.all(np.diff(p) <= 0)
    with pytest.raises(ValueError):
        make_initial_data(grid, "plateau", 3.0, r0=2.0)
    with pytest.raises(ValueError):
        make_initial_data(grid, "spike", 3.0)


# -- heat equation oracle --------------------------------------------------------


@pytest.mark.parametrize("n", [1, 3])
def test_reaction_off_matches_heat_kernel(n):
    tau0, t_end, dt = 0.05, 0.01, 1e-5
    grid = RadialGrid.make(n, 2.0, 400, beta=1.0)
    r = grid.nodes
    solver = RadialSolver(grid, make_builtin("pure_exp"), reaction=False, dt_max=dt)
    state = RadialState(grid, np.exp(-r**2 / (4 * tau0)))
    while state.t < t_end - 1e-15:
        state = solver.step(state, dt=min(dt, t_end - state.t))
    tau = tau0 + state.t
    exact = (tau0 / tau) ** (n / 2) * np.exp(-r**2 / (4 * tau))
    assert np.max(np.abs(state.u - exact)) <= 1e-4


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dt=st.floats(1e-6, 1e-1))
def test_diffusion_step_obeys_maximum_principle(seed, dt):
    grid = RadialGrid.make(2, 1.0, 64, beta=2.0)
    u = np.random.default_rng(seed).uniform(0.0, 5.0, grid.J + 1)
    solver = RadialSolver(grid, make_builtin("pure_exp"), reaction=False)
    v = solver.diffuse(u, dt)
    assert v.max() <= u.max() + 1e-12
    assert v.min() >= -1e-12


# -- ODE mode ---------------------------------------------------------------------


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_diffusion_off_reproduces_flat_solution(name):
    fam = make_builtin(name)
    table = ResolventTable(fam)
    a = max(2.0, table.x_floor + 1.0)
    grid = RadialGrid.make(1, 1.0, 32, beta=1.0)
    run = run_to_cap(RadialState(grid, make_initial_data(grid, "constant", a).u),
                     RadialSolver(grid, fam, table, diffusion=False), 20.0, keep_history=False)
    psi = table.G_inv(table.G(a) - run.t)
    np.testing.assert_allclose(run.u0, psi, rtol=1e-6)


def test_diffusion_off_blowup_time():
    fam = make_builtin("pure_exp")
    table = ResolventTable(fam)
    grid = RadialGrid.make(1, 1.0, 32, beta=1.0)
    state = RadialState(grid, make_initial_data(grid, "constant", 2.0).u)
    run = run_to_cap(state, RadialSolver(grid, fam, table, diffusion=False), 25.0)
    assert run.estimate.T_est == pytest.approx(math.exp(-2.0), rel=1e-8)
    assert diagnostics(run, table)["type_I"]["M_hat"] < 1e-5


# -- blow-up runs ------------------------------------------------------------------


def test_blowup_run_monotone_and_above_comparison_bound(pure_exp_run):
    run, table = pure_exp_run
    assert np.all(np.diff(run.u0) > 0)
    assert np.all(np.diff(run.final.u) <= 1e-10)
    assert run.estimate.T_est >= math.exp(-4.0)
    assert run.estimate.comparison_ok


def test_power_log_blowup_time_above_E1_bound():
    fam = make_builtin("power_log")
    table = ResolventTable(fam)
    grid = RadialGrid.make(1, 1.0, 400)
    run = run_to_cap(RadialState(grid, make_initial_data(grid, "bump", 4.0).u),
                     RadialSolver(grid, fam, table), 15.0, keep_history=False)
    assert run.estimate.comparison_bound == pytest.approx(exp1(4.0), rel=1e-12)  # 3.7794e-3
    assert run.estimate.T_est >= exp1(4.0)


def test_type_I_residual_and_gradient_bounds(pure_exp_run):
    run, table = pure_exp_run
    diag = diagnostics(run, table)
    assert diag["type_I"]["bounded"]
    assert diag["type_I"]["M_hat"] < 0.5
    assert diag["gradient_scaled"]["bounded"]
    assert diag["gradient_lower"]["finite"]


def test_snapshots_sit_on_integer_s(pure_exp_run):
    run, _ = pure_exp_run
    T = run.estimate.T_est
    for snap in run.snapshots:
        assert snap.s == round(snap.s)
        assert T - snap.t == pytest.approx(math.exp(-snap.s), rel=1e-12)


def test_step_budget_exhaustion():
    fam = make_builtin("pure_exp")
    grid = RadialGrid.make(1, 1.0, 100)
    state = RadialState(grid, make_initial_data(grid, "bump", 4.0).u)
    with pytest.raises(ResolutionExhausted):
        run_to_cap(state, RadialSolver(grid, fam), 20.0, max_steps=5)


def test_monotonicity_monitor_raises_on_increasing_update():
    fam = make_builtin("pure_exp")
    grid = RadialGrid.make(1, 1.0, 100)
    solver = RadialSolver(grid, fam)
    solver.diffuse = lambda u, dt: u + np.linspace(0.0, 1.0, u.size)
    with pytest.raises(InstabilityError):
        solver.step(RadialState(grid, make_initial_data(grid, "bump", 1.0).u))


def test_safety_validation():
    grid = RadialGrid.make(1, 1.0, 100)
    with pytest.raises(ValueError):
        RadialSolver(grid, make_builtin("pure_exp"), safety=0.0)
