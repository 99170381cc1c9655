import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowuplab import backend
from blowuplab.nonlin import BUILTIN_NAMES, make_builtin
from blowuplab.pde import RadialGrid, RadialSolver
from blowuplab.resolvent import ResolventTable

python = backend.get("python")
try:
    compiled = backend.get("compiled")
except ImportError:  # pragma: no cover - extension not built
    compiled = None

BACKENDS = [python] + ([compiled] if compiled is not None else [])


def test_active_backend_reported():
    assert backend.NAME in ("compiled", "python")
    assert backend.get() is backend.kernels


def test_unknown_backend():
    with pytest.raises(ValueError):
        backend.get("fortran")


@pytest.mark.parametrize("name", BUILTIN_NAMES)
@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__)
def test_L_values_match_family(name, k):
    fam = make_builtin(name)
    x = np.linspace(fam.x_floor, 80.0, 257)
    np.testing.assert_allclose(k.L_values(fam.kind_code, fam.param_vector(), x), fam.L_log(x), rtol=1e-13)


@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__)
def test_tridiagonal_solve_against_dense(k, rng):
    n = 50
    lower, upper = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    diag = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    A = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    np.testing.assert_allclose(k.solve_tridiag(lower, diag, upper, rhs), np.linalg.solve(A, rhs), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__)
def test_tridiagonal_length_mismatch(k):
    with pytest.raises(ValueError):
        k.solve_tridiag(np.ones(3), np.ones(4), np.ones(4), np.ones(4))


@pytest.mark.parametrize("name", BUILTIN_NAMES)
@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__)
def test_reaction_flow_is_exact(name, k):
    fam = make_builtin(name)
    table = ResolventTable(fam)
    solver = RadialSolver(RadialGrid.make(1, 1.0, 64, beta=1.0), fam, table, kernels=k)
    u = table.x_floor + np.linspace(0.0, 12.0, 65)
    dt = 0.2 * float(table.G(u[-1]))
    out = solver.react(u, dt)
    np.testing.assert_allclose(out, table.G_inv(table.G(u) - dt), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.__name__)
def test_reaction_flow_reports_blowup_within_step(k):
    fam = make_builtin("pure_exp")
    solver = RadialSolver(RadialGrid.make(1, 1.0, 64, beta=1.0), fam, kernels=k)
    out = solver.react(np.array([1.0, 5.0]), 2.0 * np.exp(-5.0))
    assert np.isfinite(out[0]) and np.isinf(out[1])


def test_reaction_flow_below_floor_uses_rk4():
    fam = make_builtin("power_log")  # floor at u = 1; f(u) = u e^u
    solver = RadialSolver(RadialGrid.make(1, 1.0, 64, beta=1.0), fam, kernels=python)
    u = np.array([0.0, 0.5])
    out = solver.react(u, 1e-3)
    # u' = u e^u: zero stays zero; 0.5 moves by about dt * f(0.5)
    assert out[0] == 0.0
    assert out[1] == pytest.approx(0.5 + 1e-3 * 0.5 * np.exp(0.5), rel=1e-5)


@pytest.mark.skipif(compiled is None, reason="compiled extension not built")
@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(BUILTIN_NAMES), seed=st.integers(0, 2**32 - 1), log_dt=st.floats(-12, -2))
def test_backends_agree(name, seed, log_dt):
    fam = make_builtin(name)
    table = ResolventTable(fam)
    u = table.x_floor + np.random.default_rng(seed).uniform(0.0, 15.0, 33)
    outs = [RadialSolver(RadialGrid.make(1, 1.0, 32, beta=1.0), fam, table, kernels=k).react(u, 10.0**log_dt)
            for k in (compiled, python)]
    np.testing.assert_allclose(outs[0], outs[1], rtol=1e-12, atol=1e-14)
