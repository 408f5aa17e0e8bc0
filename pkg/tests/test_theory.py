import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from mramp import theory
from mramp.errors import BoundDivergesError, ParameterError


def _mc_minimax(eps, samples=10 ** 6, seed=0):
    """Monte-Carlo risk of soft thresholding at the worst case (spikes at
    +-infinity contribute 1 + tau^2) minimised over a tau grid."""
    z = np.random.default_rng(seed).standard_normal(samples)
    taus = np.linspace(0.0, 4.0, 401)
    zero = np.array([np.mean(np.maximum(np.abs(z) - t, 0.0) ** 2) for t in taus])
    risk = eps * (1 + taus ** 2) + (1 - eps) * zero
    return risk.min()


def test_zero_risk_matches_monte_carlo():
    z = np.random.default_rng(1).standard_normal(10 ** 6)
    for tau in (0.0, 0.5, 1.5, 3.0):
        mc = np.mean(np.maximum(np.abs(z) - tau, 0.0) ** 2)
        assert float(theory.st_zero_risk(tau)) == pytest.approx(mc, rel=0.01, abs=1e-4)
    assert float(theory.st_zero_risk(0.0)) == pytest.approx(1.0)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2, 0.4])
def test_minimax_against_monte_carlo(eps):
    M, _ = theory.minimax_mse_st(eps)
    assert M == pytest.approx(_mc_minimax(eps), rel=0.005)


def test_minimax_endpoints_and_shape():
    assert theory.minimax_mse_st(0.0)[0] == 0.0
    assert theory.minimax_mse_st(1.0)[0] == 1.0
    eps = np.linspace(0.01, 0.99, 50)
    M = np.array([theory.minimax_mse_st(e)[0] for e in eps])
    tau = np.array([theory.minimax_mse_st(e)[1] for e in eps])
    assert np.all(np.diff(M) > 0)
    assert np.all(np.diff(tau) <= 1e-8)
    with pytest.raises(ParameterError):
        theory.minimax_mse_st(1.5)


def test_curve_interpolation_accuracy():
    curve = theory.minimax_curve()
    assert len(curve.eps) == 200
    for e in (0.0137, 0.071, 0.333, 0.777):
        assert float(curve(e)) == pytest.approx(theory.minimax_mse_st(e)[0], abs=1e-4)


def test_curve_csv(tmp_path):
    theory.MinimaxCurve.build(20).write_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "eps,M,tau_star" and len(lines) == 21


def test_concavity_and_subadditivity():
    rep = theory.concavity_check(np.linspace(0.02, 0.98, 50))
    assert rep.ok, (rep.concavity_violations[:3], rep.subadditivity_violations[:3])


def test_ptc_lr():
    for e in (0.05, 0.1, 0.2):
        assert theory.ptc_lr(e, 1) == pytest.approx(theory.ptc_hr(e))
        assert theory.ptc_lr(e, 2) <= theory.ptc_hr(e) + 1e-12
    with pytest.raises(ParameterError):
        theory.ptc_lr(0.3, 4)


def test_rho_star_roundtrip():
    for delta in (0.2, 0.4, 0.6):
        rho = theory.rho_star(delta)
        assert theory.ptc_hr(rho * delta) == pytest.approx(delta, abs=1e-9)
    # the LR curve is the HR curve compressed towards delta = 0 (shifted left);
    # as the curve increases in delta, the critical rho at fixed delta grows with d
    assert theory.rho_star(0.2, 1) < theory.rho_star(0.2, 2) < theory.rho_star(0.2, 4)
    assert theory.rho_star(0.1, 2) == pytest.approx(theory.rho_star(0.2, 1))


def test_critical_d():
    eps1, delta1 = 0.05, 0.15
    d = theory.critical_d(eps1, delta1)
    assert d > 1
    assert theory.minimax_mse_st(d * eps1)[0] / d == pytest.approx(delta1, abs=1e-6)
    assert theory.critical_d(0.01, 0.5) == 1.0


def test_noise_sensitivity_bound():
    assert theory.ns_bound_lr(0.06, 2, 0.2, 0.0, 0.0, 400) == 0.0
    with pytest.raises(BoundDivergesError):
        theory.ns_bound_lr(0.2, 2, 0.2, 1.0, 0.0, 400)
    # the bound does not depend on gamma; with approximation energy ~12 it is ~5.23
    assert theory.ns_bound_lr(0.06, 2, 0.2, 1.0, 12.0, 400) == pytest.approx(5.23, abs=0.01)
    # worst 8-bit approximation energy is 255^2 n1 with m = delta1 n1
    n1 = 2000
    lr = theory.ns_bound_lr(0.06, 2, 0.2, 1.0, 255 ** 2 * n1, 0.2 * n1)
    assert theory.ns_bound_pixel_worstcase(0.06, 2, 0.2, 1.0) >= lr
    assert theory.ns_bound_pixel_worstcase(0.06, 2, 0.2, 0.0) > 0


def test_pixel_worstcase_algebra():
    eps1, d, delta1, s2 = 0.05, 2, 0.3, 4.0
    M = theory.minimax_mse_st(d * eps1)[0]
    expected = M / (1 - M / (d * delta1)) * (s2 + 255.0 ** 2 * d / M)
    assert theory.ns_bound_pixel_worstcase(eps1, d, delta1, s2) == pytest.approx(expected)


def test_hr_three_point_reference():
    got = [theory.ns_bound_hr_three_point(0.2, g) for g in (0.95, 0.98, 0.99, 0.998)]
    np.testing.assert_allclose(got, [3.80, 9.80, 19.80, 99.80], rtol=1e-9)


def test_three_point_mu_hits_target_risk():
    # Monte-Carlo check of the fixed-point risk at the returned amplitude
    gamma, eps, delta = 0.98, 0.06, 0.2
    mu = theory.three_point_mu(gamma, eps, delta)
    s = 1.0 / math.sqrt(1 - gamma)
    tau = theory.minimax_tau(eps)
    z = np.random.default_rng(3).standard_normal(10 ** 6)
    a = mu / s
    risk = (1 - eps) * np.mean(np.maximum(np.abs(z) - tau, 0) ** 2) + eps * np.mean(
        (np.sign(a + z) * np.maximum(np.abs(a + z) - tau, 0) - a) ** 2)
    assert risk == pytest.approx(delta * gamma, rel=0.01)


def test_maxmin_alpha():
    eps = theory.inverse_minimax(0.3)
    assert theory.maxmin_alpha(0.3) == pytest.approx(theory.minimax_tau(eps))


@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999), st.sampled_from([0.25, 0.5, 0.75]))
def test_concavity_property(a, b, q):
    lhs = theory.minimax_mse_st(q * a + (1 - q) * b)[0]
    rhs = q * theory.minimax_mse_st(a)[0] + (1 - q) * theory.minimax_mse_st(b)[0]
    assert lhs >= rhs - 1e-6


@given(st.floats(0.001, 0.49), st.sampled_from([2, 3, 4]))
def test_subadditivity_property(e, d):
    if d * e <= 1:
        assert theory.minimax_mse_st(d * e)[0] / d <= theory.minimax_mse_st(e)[0] + 1e-6


@given(st.floats(0.01, 0.99))
def test_minimax_is_minimum(eps):
    M, tau = theory.minimax_mse_st(eps)
    grid = np.linspace(0, 6, 601)
    assert M <= float(np.min(theory.minimax_objective(grid, eps))) + 1e-9
    assert M == pytest.approx(float(theory.minimax_objective(tau, eps)))
