import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowuplab.nonlin import (BUILTIN_NAMES, FamilyError, admissible_alpha, certify_slow_variation,
                              certify_uniform_ratio, default_families, make_builtin)

CERT_GRID = np.geomspace(10.0, 1e12, 256)


def test_builtin_names_resolve():
    assert [f.name for f in default_families()] == list(BUILTIN_NAMES)


@pytest.mark.parametrize("name, params", [
    ("nope", None),
    ("power_log", {"q": 0.5, "K": 0.0}),
    ("power_log", {"K": -1.0}),
    ("log_power", {"K": 0.5}),
    ("exp_shift", {"nu": 0.7}),
    ("exp_shift", {"sign": 2.0}),
    ("amplitude_sin", {"a": 1.0}),
    ("oscillating_cos_power", {"nu": 0.3, "gamma": 0.3}),
    ("pure_exp", {"q": 1.0}),
])
def test_invalid_families_rejected(name, params):
    with pytest.raises(FamilyError):
        make_builtin(name, params)


def test_sign_shorthand():
    assert make_builtin("exp_shift", {"sign": "-"}).params["sign"] == -1.0


@pytest.mark.parametrize("name, X, L_expected", [
    ("pure_exp", 5.0, 1.0),
    ("power_log", 5.0, 5.0),  # L(x) = x
    ("log_power", 5.0, math.log(6.0)),  # log(x + 1)
    ("exp_shift", 15.0, math.exp(2.0)),  # exp((x+1)^(1/4))
    ("amplitude_sin", 0.0, 1.0 + 0.5 * math.sin(1.0)),
])
def test_L_closed_forms(name, X, L_expected):
    fam = make_builtin(name)
    assert fam.L_log(np.array(X)) == pytest.approx(L_expected, rel=1e-14)


@pytest.mark.parametrize("fam", default_families(), ids=lambda f: f.name)
def test_derivatives_match_finite_differences(fam):
    x = np.array([3.0, 7.5, 20.0])
    h = 1e-5
    Lx_fd = (fam.L_log(x + h) - fam.L_log(x - h)) / (2 * h)
    H = 1e-3  # second difference: roundoff grows like eps / H^2
    Lxx_fd = (fam.L_log(x + H) - 2 * fam.L_log(x) + fam.L_log(x - H)) / H**2
    np.testing.assert_allclose(fam.Lx_log(x), Lx_fd, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(fam.Lxx_log(x), Lxx_fd, rtol=1e-4, atol=1e-5)


@pytest.mark.parametrize("fam", default_families(), ids=lambda f: f.name)
def test_theta_is_log_derivative(fam):
    x = np.array([4.0, 12.0, 30.0])
    h = 1e-5
    fd = (fam.logL(x + h) - fam.logL(x - h)) / (2 * h)
    np.testing.assert_allclose(fam.theta_at_log(x), fd, rtol=1e-7, atol=1e-10)
    fd2 = (fam.theta_at_log(x + h) - fam.theta_at_log(x - h)) / (2 * h)
    np.testing.assert_allclose(fam.dtheta_at_log(x), fd2, rtol=1e-5, atol=1e-10)


def test_theta_finite_where_L_overflows():
    fam = make_builtin("exp_shift")
    x = np.array([1e12])  # L = exp(1000) overflows
    assert np.isfinite(fam.theta_at_log(x)).all()
    assert fam.theta_at_log(x)[0] == pytest.approx(0.25 * (1e12 + 1) ** -0.75, rel=1e-12)


def test_f_and_log_f_consistent():
    fam = make_builtin("power_log")
    s = np.array([1.5, 3.0, 10.0])
    np.testing.assert_allclose(fam.f(s), s * np.exp(s), rtol=1e-14)
    np.testing.assert_allclose(fam.log_f(s), s + np.log(s), rtol=1e-14)
    np.testing.assert_allclose(fam.df(s), (1 + s) * np.exp(s), rtol=1e-14)


@pytest.mark.parametrize("fam", default_families(), ids=lambda f: f.name)
def test_certificates_pass_at_admissible_alpha(fam):
    alpha = admissible_alpha(fam)
    assert 0.5 < alpha < 1.0
    assert certify_slow_variation(fam, alpha, log_grid=CERT_GRID).passed
    assert certify_uniform_ratio(fam, alpha, np.geomspace(20, 200, 16)).passed


@pytest.mark.parametrize("alpha, expected", [(0.52, True), (0.9, False)])
def test_amplitude_sin_condition_needs_alpha_below_one_minus_nu(alpha, expected):
    # |theta| log^alpha X ~ (log X)^(alpha + nu - 1): decays iff alpha < 1 - nu = 0.55
    fam = make_builtin("amplitude_sin", {"nu": 0.45, "a": 0.5})
    assert certify_slow_variation(fam, alpha, log_grid=CERT_GRID).passed is expected


def test_cos_power_threshold():
    fam = make_builtin("oscillating_cos_power")  # 1 - nu - gamma = 0.6
    assert certify_slow_variation(fam, 0.55, log_grid=CERT_GRID).passed
    assert not certify_slow_variation(fam, 0.7, log_grid=CERT_GRID).passed


def test_slow_variation_grid_validation():
    fam = make_builtin("pure_exp")
    with pytest.raises(ValueError):
        certify_slow_variation(fam, 0.9, log_grid=np.linspace(10, 12, 20))
    with pytest.raises(ValueError):
        certify_slow_variation(fam, 0.9, log_grid=np.linspace(10, 60, 4))
    with pytest.raises(ValueError):
        certify_slow_variation(fam, 0.9)


@settings(max_examples=60, deadline=None)
@given(name=st.sampled_from(BUILTIN_NAMES), x=st.floats(3.0, 200.0), lam=st.floats(-2.0, 2.0))
def test_slow_variation_ratio_close_to_one(name, x, lam):
    # L(lambda X) / L(X) with |log lambda| <= 2 stays within the uniform bound 4|log lambda| / log^alpha X
    fam = make_builtin(name)
    alpha = admissible_alpha(fam)
    if x + lam < max(fam.x_floor, 1.0) or x < 20:
        return
    rel = abs(math.expm1(float(fam.logL(np.array(x + lam)) - fam.logL(np.array(x)))))
    assert rel <= 4 * abs(lam) / x**alpha * 1.05 + 1e-15
