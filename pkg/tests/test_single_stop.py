import math

import numpy as np
import pytest
from scipy import integrate

from levy_stop import (
    UNBOUNDED,
    CallLinear,
    ConditionMViolation,
    ConstantRate,
    IdentityPositive,
    LocalTimeAtZero,
    OccupationNegative,
    PowerPositivePart,
    PutLike,
    is_unbounded,
    make_profile,
    solve_single,
    value_function,
)
from levy_stop.rewards import HTransform
from levy_stop.single_stop import compute_c0, smooth_fit_check, solve_threshold, strategy_value, threshold_sweep

G15 = math.gamma(1.5)


def local_time_threshold(alpha, beta=1.5, r=1.0):
    return (alpha * math.gamma(beta) / (r * (beta - alpha - 1.0))) ** (1.0 / (beta - 1.0))


@pytest.fixture
def local_time_sol(stable15):
    return solve_single(PowerPositivePart(0.3), make_profile(LocalTimeAtZero(1.0), stable15))


@pytest.fixture
def occupation_sol(jump_model):
    return solve_single(IdentityPositive(), make_profile(OccupationNegative(0.18, 2.0), jump_model))


def test_local_time_threshold(local_time_sol):
    assert local_time_sol.x_star == pytest.approx(1.7672, abs=5e-4)
    assert local_time_sol.x_star == pytest.approx(local_time_threshold(0.3), abs=1e-9)
    assert local_time_sol.c0 == 0.0


@pytest.mark.parametrize("alpha", [0.05, 0.2, 0.35, 0.45])
def test_local_time_threshold_formula(stable15, alpha):
    sol = solve_single(PowerPositivePart(alpha), make_profile(LocalTimeAtZero(1.0), stable15))
    assert sol.x_star == pytest.approx(local_time_threshold(alpha), rel=1e-8)


def test_occupation_threshold(occupation_sol):
    assert occupation_sol.x_star == pytest.approx(0.8356, abs=1e-3)
    lam = float(occupation_sol.profile.hazard(occupation_sol.x_star))
    assert occupation_sol.x_star - 1.0 / lam == pytest.approx(0.0, abs=1e-9)


def test_local_time_value_closed_form(local_time_sol):
    xs_ = local_time_sol.x_star
    xs = np.linspace(-1.0, 3.0, 50)
    expected = np.where(
        xs <= xs_,
        xs_**0.3 * (G15 + np.maximum(xs, 0.0) ** 0.5) / (G15 + xs_**0.5),
        np.maximum(xs, 0.0) ** 0.3,
    )
    np.testing.assert_allclose(value_function(local_time_sol, xs), expected, rtol=1e-8)


def test_occupation_value_ratio(occupation_sol):
    sol = occupation_sol
    sf = sol.profile.scale
    theta = sol.profile.theta
    phi = sf.phi

    def tail(z):
        # int_0^inf e^{-theta y} W^(r)(z + y) dy by quadrature; W vanishes below zero
        start = max(0.0, -z)
        val, _ = integrate.quad(
            lambda y: math.exp(phi * (z + y) - theta * y) * float(sf.w_scaled(z + y)),
            start,
            np.inf,
            epsabs=0.0,
            epsrel=1e-12,
            limit=200,
        )
        return val

    for x in (-0.5, 0.0, 0.4):
        expected = sol.x_star * tail(x) / tail(sol.x_star)
        assert value_function(sol, x) == pytest.approx(expected, rel=1e-8)


def test_value_in_stopping_region(occupation_sol, local_time_sol):
    for sol in (occupation_sol, local_time_sol):
        x = sol.x_star + 1.0
        assert value_function(sol, x) == pytest.approx(float(sol.f.f(x)), rel=1e-14)


def test_value_dominates_reward(occupation_sol, local_time_sol):
    xs = np.linspace(-2.0, 4.0, 121)
    for sol in (occupation_sol, local_time_sol):
        assert np.all(value_function(sol, xs) >= np.asarray(sol.f.f(xs)) - 1e-13)


def test_smooth_fit(occupation_sol, local_time_sol, std_bm):
    call = solve_single(CallLinear(1.0), make_profile(ConstantRate(0.75), std_bm))
    for sol in (occupation_sol, local_time_sol, call):
        assert smooth_fit_check(sol) < 1e-3
        assert sol.smooth_fit_gap < 1e-3


def test_call_threshold_constant_rate(std_bm):
    sol = solve_single(CallLinear(1.0), make_profile(ConstantRate(0.75), std_bm))
    phi = math.sqrt(1.5)
    assert sol.x_star == pytest.approx(math.log(phi / (phi - 1.0)), abs=1e-9)


def test_unbounded_call(std_bm):
    sol = solve_single(CallLinear(1.0), make_profile(ConstantRate(0.05), std_bm))
    assert sol.x_star == math.inf
    assert sol.c0 == math.inf
    assert not sol.bounded
    assert is_unbounded(value_function(sol, 0.0))
    assert value_function(sol, 0.0) is UNBOUNDED
    with pytest.raises(TypeError):
        float(UNBOUNDED)


@pytest.mark.parametrize("alpha,expected", [(0.3, 0.0), (0.5, G15), (0.8, math.inf)])
def test_c0_branches(stable15, alpha, expected):
    c0 = compute_c0(PowerPositivePart(alpha), make_profile(LocalTimeAtZero(1.0), stable15))
    if math.isinf(expected) or expected == 0.0:
        assert c0 == expected
    else:
        assert c0 == pytest.approx(expected, rel=1e-4)


def test_value_with_infinite_threshold(stable15):
    # alpha = beta - 1: never stop, value c0 * exp(I(0, x))
    prof = make_profile(LocalTimeAtZero(1.0), stable15)
    sol = solve_single(PowerPositivePart(0.5), prof)
    assert sol.x_star == math.inf
    assert value_function(sol, 2.0) == pytest.approx(G15 * (G15 + math.sqrt(2.0)) / G15, rel=1e-4)


def test_all_positive_h_means_stop_at_once(jump_model):
    prof = make_profile(ConstantRate(0.18), jump_model)
    h = HTransform(lambda x: np.ones_like(np.asarray(x, dtype=float)), -math.inf, "test")
    assert solve_threshold(h) == -math.inf


def test_violation_raises():
    h = HTransform(lambda x: np.sin(np.asarray(x, dtype=float)), -5.0, "test")
    with pytest.raises(ConditionMViolation) as exc:
        solve_threshold(h)
    assert exc.value.report is not None


@pytest.mark.parametrize("which", ["local", "occupation", "put", "call"])
def test_threshold_sweep_optimality(which, local_time_sol, occupation_sol, jump_model, std_bm):
    if which == "local":
        sol, x = local_time_sol, 0.0
    elif which == "occupation":
        sol, x = occupation_sol, 0.0
    elif which == "put":
        sol, x = solve_single(PutLike(1.0), make_profile(ConstantRate(0.18), jump_model)), -0.5
    else:
        sol, x = solve_single(CallLinear(1.0), make_profile(ConstantRate(0.75), std_bm)), 0.0
    zs, vals = threshold_sweep(sol, x, n=200)
    step = zs[1] - zs[0]
    assert abs(zs[np.argmax(vals)] - sol.x_star) <= step
    assert np.max(vals) <= value_function(sol, x) + 1e-12


def test_strategy_value_edges(occupation_sol):
    sol = occupation_sol
    assert float(strategy_value(sol.f, sol.profile, 0.4, 0.4)) == pytest.approx(0.4)
    assert float(strategy_value(sol.f, sol.profile, 0.0, sol.x_star)) == pytest.approx(value_function(sol, 0.0))


def test_runtime(stable15, jump_model):
    import time

    t0 = time.perf_counter()
    solve_single(PowerPositivePart(0.3), make_profile(LocalTimeAtZero(1.0), stable15))
    t1 = time.perf_counter()
    solve_single(IdentityPositive(), make_profile(OccupationNegative(0.18, 2.0), jump_model))
    t2 = time.perf_counter()
    assert t1 - t0 < 1.0
    assert t2 - t1 < 5.0
