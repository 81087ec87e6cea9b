import math

import numpy as np
import pytest
from scipy import integrate

from levy_stop import BrownianDrift, DomainError, StableSN, UnsupportedError, build_scale, laplace_exponent
from levy_stop.scale_fn import CLOSED_FORM_STABLE, PARTIAL_FRACTIONS, TALBOT, TWO_EXPONENTIAL


def laplace_residual(sf, lam):
    """Relative gap between the numerical transform of W and 1/(psi - q)."""
    shift = lam - sf.phi
    val, _ = integrate.quad(
        lambda y: math.exp(-shift * y) * float(sf.w_scaled(y)), 0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=400
    )
    exact = 1.0 / (laplace_exponent(sf.model, lam) - sf.q)
    return abs(val - exact) / exact


def test_stable_closed_form():
    sf = build_scale(StableSN(1.5), 0.0)
    assert sf.representation == CLOSED_FORM_STABLE
    assert sf.w(1.0) == pytest.approx(1.0 / math.gamma(1.5), rel=1e-14)
    assert sf.w(1.0) == pytest.approx(1.1284, abs=1e-4)
    assert build_scale(StableSN(2.0), 0.0).w(1.0) == pytest.approx(1.0, rel=1e-14)
    assert sf.w_prime(1.0) == pytest.approx(0.5 / math.gamma(1.5), rel=1e-14)


def test_stable_needs_zero_q():
    with pytest.raises(UnsupportedError):
        build_scale(StableSN(1.5), 0.1)


def test_brownian_two_exponential(std_bm):
    sf = build_scale(std_bm, 0.5)
    assert sf.representation == TWO_EXPONENTIAL
    xs = np.linspace(0.1, 5.0, 7)
    np.testing.assert_allclose(sf.w(xs), 2.0 * np.sinh(xs), rtol=1e-11)
    np.testing.assert_allclose(sf.w_prime(xs), 2.0 * np.cosh(xs), rtol=1e-11)
    assert sf.w(1.0) == pytest.approx(2.3504, abs=1e-4)
    assert sf.w_prime(1.0) == pytest.approx(3.0862, abs=1e-4)


def test_jump_model_roots(jump_model):
    sf = build_scale(jump_model, 0.18)
    assert sf.representation == PARTIAL_FRACTIONS
    roots = np.sort(np.real(np.asarray(sf.roots)))
    assert len(roots) == 3
    assert np.all(np.abs(np.imag(np.asarray(sf.roots))) < 1e-12)
    assert roots[-1] == pytest.approx(sf.phi, abs=1e-12)
    assert sf.phi == pytest.approx(1.1627, abs=1.5e-4)
    # every root solves psi(l) = q once psi is continued to negative l (away from the pole at -4)
    for lam in roots:
        val = 0.18 * lam + 0.02 * lam**2 - 0.25 * lam / (lam + 4.0)
        assert val == pytest.approx(0.18, abs=1e-9)


def test_support_and_origin(jump_model):
    sf = build_scale(jump_model, 0.18)
    assert sf.w(-1.0) == 0.0
    assert sf.w(0.0) == 0.0
    np.testing.assert_array_equal(sf.w(np.array([-5.0, -0.1])), [0.0, 0.0])


def test_derivative_at_origin_is_two_over_sigma_squared(jump_model):
    sf = build_scale(jump_model, 0.18)
    assert sf.w_prime(1e-9) == pytest.approx(2.0 / 0.2**2, rel=1e-6)


def test_derivative_domain(jump_model):
    sf = build_scale(jump_model, 0.18)
    with pytest.raises(DomainError):
        sf.w_prime(0.0)


@pytest.mark.parametrize("case", ["jump", "bm"])
@pytest.mark.parametrize("offset", [0.5, 1.0, 2.0])
def test_laplace_residual(case, offset, jump_model, std_bm):
    sf = build_scale(jump_model, 0.18) if case == "jump" else build_scale(std_bm, 0.5)
    assert laplace_residual(sf, sf.phi + offset) < 1e-6


def test_talbot_matches_partial_fractions(jump_model):
    pf = build_scale(jump_model, 0.18)
    tb = build_scale(jump_model, 0.18, force_talbot=True)
    assert tb.representation == TALBOT
    xs = np.linspace(0.05, 6.0, 20)
    np.testing.assert_allclose(tb.w(xs), pf.w(xs), rtol=1e-6)


def test_talbot_matches_stable_closed_form():
    exact = build_scale(StableSN(1.5), 0.0)
    tb = build_scale(StableSN(1.5), 0.0, force_talbot=True)
    xs = np.array([0.2, 1.0, 3.0])
    np.testing.assert_allclose(tb.w(xs), exact.w(xs), rtol=1e-6)


def test_growth_rate(jump_model):
    # e^{-Phi x} W(x) -> 1 / psi'(Phi)
    sf = build_scale(jump_model, 0.18)
    x = 50.0 / max(sf.phi, 1.0)
    assert sf.w_scaled(x) == pytest.approx(1.0 / jump_model.psi_prime(sf.phi), rel=1e-8)


def test_log_derivative_decreasing(jump_model):
    sf = build_scale(jump_model, 0.18)
    xs = np.linspace(0.05, 10.0, 200)
    ratio = sf.w_prime(xs) / sf.w(xs)
    # strictly decreasing until it flattens onto Phi at machine precision
    assert np.all(np.diff(ratio) < 1e-12)
    assert np.all(np.diff(ratio[xs < 3.0]) < 0.0)
    assert ratio[-1] == pytest.approx(sf.phi, rel=1e-12)


def test_tail_integral_brownian(std_bm):
    sf = build_scale(std_bm, 0.5)
    # int_0^inf e^{-3y} 2 sinh(y) dy = 1/2 - 1/4
    assert sf.tail_integral(3.0, 0.0) == pytest.approx(0.25, rel=1e-12)


def test_tail_integral_against_quadrature(jump_model):
    sf = build_scale(jump_model, 0.18)
    theta = 7.2171942  # roughly Phi(0.18 + 2); any theta > Phi works
    phi = sf.phi
    val, _ = integrate.quad(
        lambda y: math.exp(phi - (theta - phi) * y) * float(sf.w_scaled(1.0 + y)), 0.0, np.inf, epsrel=1e-12
    )
    assert sf.tail_integral(theta, 1.0) == pytest.approx(val, rel=1e-8)
    assert sf.tail_integral(theta, -60.0) < 1e-150


def test_tail_integral_needs_theta_above_phi(jump_model):
    from levy_stop import DivergenceError

    sf = build_scale(jump_model, 0.18)
    with pytest.raises(DivergenceError):
        sf.tail_integral(sf.phi, 0.0)
