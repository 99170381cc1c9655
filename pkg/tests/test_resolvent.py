import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import exp1, lambertw

from blowuplab.nonlin import BUILTIN_NAMES, make_builtin
from blowuplab.resolvent import DomainError, OdeSolution, ResolventTable, certify_asymptotic_lemmas


def quad_scaled(fam, X, numerator=lambda s: 1.0):
    """e^X int_X^inf N(s)/f(s) ds by adaptive quadrature, written in tau = s - X."""
    val, _ = quad(lambda tau: math.exp(-tau) * numerator(X + tau) / float(fam.L_log(np.array(X + tau))),
                  0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


# -- closed forms ---------------------------------------------------------------


def test_pure_exp_closed_forms():
    t = ResolventTable(make_builtin("pure_exp"))
    X = np.linspace(1.0, 30.0, 59)
    np.testing.assert_allclose(t.G(X), np.exp(-X), rtol=1e-13)
    np.testing.assert_allclose(t.H(X), (t.A0 + X + 1.0) * np.exp(-X), rtol=1e-13)
    Y = np.exp(-X)
    np.testing.assert_allclose(t.G_inv(Y), X, rtol=1e-13)
    ode = OdeSolution(1.0, t)
    np.testing.assert_allclose(ode.psi1(X), X, rtol=1e-13)
    np.testing.assert_allclose(ode.h(X), 1.0, rtol=1e-13)


def test_pure_exp_H_inverse_against_lambert_w():
    # (X + A0 + 1) e^{-X} = Y  <=>  X = -W_{-1}(-Y e^{-(A0+1)}) - (A0 + 1)
    t = ResolventTable(make_builtin("pure_exp"))
    c = t.A0 + 1.0
    for Y in (1e-4, 1e-8, 1e-12, 1e-100):
        X = -lambertw(-Y * math.exp(-c), -1).real - c
        assert float(t.H_inv(Y)) == pytest.approx(X, rel=1e-12)


@pytest.mark.parametrize("q, oracle", [
    (1.0, lambda X: exp1(X)),
    (2.0, lambda X: np.exp(-X) / X - exp1(X)),
])
def test_power_log_G_against_exponential_integral(q, oracle):
    t = ResolventTable(make_builtin("power_log", {"q": q, "K": 0.0}))
    X = np.array([1.5, 5.0, 20.0, 40.0, 300.0])
    np.testing.assert_allclose(t.G(X), oracle(X), rtol=1e-12)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_G_against_adaptive_quadrature(name):
    fam = make_builtin(name)
    t = ResolventTable(fam)
    for X in (fam.x_floor + 0.3, 5.0, 12.7, 45.0, 90.0):
        assert float(t.J_G(X)) == pytest.approx(quad_scaled(fam, X), rel=1e-11)


@pytest.mark.parametrize("name", ["power_log", "log_power", "oscillating_sin_log"])
def test_H_against_adaptive_quadrature(name):
    fam = make_builtin(name)
    t = ResolventTable(fam)
    for X in (fam.x_floor + 0.5, 7.0, 33.0):
        ref = quad_scaled(fam, X, lambda s: t.A0 + float(fam.log_f(np.array(s))))
        assert float(t.J_H(X)) == pytest.approx(ref, rel=1e-11)


def test_far_tail_is_finite_in_log_space():
    t = ResolventTable(make_builtin("power_log"))
    # G(800) = E1(800) underflows; X e^X E1(X) = 1 - 1/X + 2/X^2 - 6/X^3 + 24/X^4 - ... (error < 120/X^5)
    X = 800.0
    series = sum((-1) ** k * math.factorial(k) / X**k for k in range(5))
    assert float(t.logG(X)) == pytest.approx(-X - math.log(X) + math.log(series), rel=1e-14)
    assert float(t.logG(t.G_inv_log(-1000.0))) == pytest.approx(-1000.0, rel=1e-13)


# -- domain ---------------------------------------------------------------------


def test_below_floor_raises():
    t = ResolventTable(make_builtin("power_log"))  # floor at log X = 1
    with pytest.raises(DomainError):
        t.G(0.5)
    with pytest.raises(DomainError):
        t.G_inv(2.0 * float(t.G(1.0)))


def test_invalid_A0_rejected():
    with pytest.raises(ValueError):
        ResolventTable(make_builtin("pure_exp"), A0=-5.0)


# -- inverses ---------------------------------------------------------------------


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_vector_and_scalar_inversions_agree(name, tables):
    t = tables[name]
    logY = np.linspace(-150.0, float(t.logG(t.x_floor + 0.01)), 40)
    vec = t.G_inv_log(logY)
    sca = np.array([t.G_inv_log(float(v)) for v in logY])
    np.testing.assert_allclose(vec, sca, rtol=1e-14, atol=1e-14)


@settings(max_examples=80, deadline=None)
@given(name=st.sampled_from(BUILTIN_NAMES), dx=st.floats(0.0, 300.0))
def test_round_trip_G(name, dx):
    t = ResolventTable(make_builtin(name))
    X = t.x_floor + dx
    assert float(t.G_inv_log(t.logG(X))) == pytest.approx(X, rel=1e-11, abs=1e-11)
    assert float(t.H_inv_log(t.logH(X))) == pytest.approx(X, rel=1e-11, abs=1e-11)


@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(BUILTIN_NAMES), a=st.floats(0.0, 100.0), b=st.floats(0.01, 100.0))
def test_G_strictly_decreasing(name, a, b):
    t = ResolventTable(make_builtin(name))
    X = t.x_floor + a
    assert float(t.logG(X + b)) < float(t.logG(X))


def test_first_order_inverse_gap_shrinks():
    t = ResolventTable(make_builtin("power_log"))
    logY = np.array([-10.0, -100.0, -1000.0])
    gap = np.abs(t.G_inv_log(logY) - t.first_order_G_inv(logY))
    assert np.all(np.diff(gap) < 0)


def test_dG_is_minus_one_over_f():
    fam = make_builtin("log_power")
    t = ResolventTable(fam)
    X, h = 6.0, 1e-5
    fd = (float(t.G(X + h)) - float(t.G(X - h))) / (2 * h)
    assert float(t.dG(X)) == pytest.approx(fd, rel=1e-7)


def test_Q_is_G_in_log_variable():
    t = ResolventTable(make_builtin("power_log"))
    x = np.array([10.0, 30.0])
    np.testing.assert_allclose(t.Q(np.exp(x)), t.G(x), rtol=1e-14)
    np.testing.assert_allclose(t.Q_scaled_at_log(x), np.exp(x) * t.G(x), rtol=1e-12)


# -- flat solution ----------------------------------------------------------------


def test_psi_solves_the_ode():
    fam = make_builtin("power_log")
    t = ResolventTable(fam)
    ode = OdeSolution(0.5, t)
    tt, k = 0.3, 1e-6
    dpsi = (float(ode.psi(tt + k)) - float(ode.psi(tt - k))) / (2 * k)
    assert dpsi == pytest.approx(float(fam.f(ode.psi(tt))), rel=1e-7)


def test_psi_needs_t_before_T():
    ode = OdeSolution(0.5, ResolventTable(make_builtin("pure_exp")))
    with pytest.raises((DomainError, ValueError, FloatingPointError)):
        ode.psi(0.7)


# -- asymptotic relations -------------------------------------------------------


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_lemma_trends(name, tables):
    rep = certify_asymptotic_lemmas(tables[name])
    for key in ("G_f_minus_1", "H_f_over_X_minus_1", "H_over_G_logG_minus_1", "eps_controls"):
        assert rep[key]["passed"], key
    assert rep["H_inv_minus_G_inv_shifted"]["decreasing"]


def test_inverse_gap_values_pure_exp(tables):
    # closed form: gap = log((X_H + A0 + 1) / |log Y|), X_H from Lambert W
    rep = certify_asymptotic_lemmas(tables["pure_exp"])["H_inv_minus_G_inv_shifted"]
    expected = []
    for Y in (1e-4, 1e-8, 1e-12):
        XH = -lambertw(-Y * math.exp(-4.0), -1).real - 4.0
        L = abs(math.log(Y))
        expected.append(abs(XH - (L + math.log(L))))
    np.testing.assert_allclose(rep["gap"], expected, rtol=1e-10)
    np.testing.assert_allclose(rep["gap"], [0.5511231641, 0.3316870056, 0.2418750066], rtol=1e-9)
