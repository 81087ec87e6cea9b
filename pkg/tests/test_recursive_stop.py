import math

import numpy as np
import pytest

from levy_stop import (
    BrownianDrift,
    CallLinear,
    ConstantCost,
    ConstantRate,
    ExpAffine,
    IntegrabilityError,
    PutLike,
    RefractionProblem,
    RunningCostProblem,
    StableSN,
    UnsupportedError,
    make_profile,
    phi_right_inverse,
    solve_refraction,
    solve_running_cost,
    solve_single,
)
from levy_stop.montecarlo import mc_expectation_above
from levy_stop.recursive_stop import GridFunction, IncrementLaw, refraction_step, running_cost_step
from levy_stop.rewards import HTransform, expected_h_of_max


@pytest.fixture(scope="module")
def call_ladder():
    problem = RefractionProblem(BrownianDrift(0.0, 1.0), 0.75, 1.0, 3, CallLinear(1.0))
    return problem, solve_refraction(problem)


@pytest.fixture(scope="module")
def put_ladder():
    from levy_stop import CramerLundbergExp

    model = CramerLundbergExp(0.18, 0.2, 0.25, 4.0)
    problem = RefractionProblem(model, 0.18, 1.0, 3, PutLike(1.0))
    return problem, solve_refraction(problem)


def _running(jump_model, c, n=3):
    prof = make_profile(ConstantRate(0.18), jump_model)
    return solve_running_cost(RunningCostProblem(prof, [PutLike(1.0)] * n, [ConstantCost(c)] * n))


# -- grid functions and increments -------------------------------------------


def test_grid_function_tail_fit():
    nodes = np.linspace(0.0, 5.0, 501)
    g = GridFunction(nodes, 2.0 + 3.0 * np.exp(nodes), [np.ones_like, np.exp])
    assert g(7.0) == pytest.approx(2.0 + 3.0 * math.exp(7.0), rel=1e-9)
    assert g(-3.0) == pytest.approx(5.0)
    assert g(2.5) == pytest.approx(2.0 + 3.0 * math.exp(2.5), rel=1e-4)


def test_grid_function_rejects_unsorted_nodes():
    with pytest.raises(ValueError):
        GridFunction(np.array([0.0, 2.0, 1.0]), np.zeros(3))


def test_increment_law_moments(jump_model):
    law = IncrementLaw(jump_model, 0.7)
    one = law.expect_above(lambda y: np.ones_like(y), np.array([0.0]), -1e300)[0]
    mean = law.expect_above(lambda y: y, np.array([0.3]), -1e300)[0]
    assert one == pytest.approx(1.0, abs=1e-10)
    assert mean == pytest.approx(0.3 + jump_model.psi_prime_zero() * 0.7, abs=1e-8)


def test_increment_law_normal_tail():
    law = IncrementLaw(BrownianDrift(0.2, 1.0), 1.0)
    from scipy import stats

    # P(x + X_1 > 1) for x = 0.5
    p = law.expect_above(lambda y: np.ones_like(y), np.array([0.5]), 1.0)[0]
    assert p == pytest.approx(stats.norm.sf(1.0 - 0.7), rel=1e-10)


def test_increment_law_rejects_stable():
    with pytest.raises(UnsupportedError):
        IncrementLaw(StableSN(1.5), 1.0)


@pytest.mark.slow
@pytest.mark.parametrize("which", ["call", "put"])
def test_expectation_term_against_monte_carlo(which, call_ladder, put_ladder):
    problem, sol = call_ladder if which == "call" else put_ladder
    h1, x1 = sol.h_levels[0], sol.thresholds[0]
    law = IncrementLaw(problem.model, problem.delta)
    for i, x in enumerate((x1 - 0.5, x1, x1 + 0.7)):
        quad = float(law.expect_above(h1, np.array([x]), x1)[0])
        est = mc_expectation_above(h1, problem.model, problem.delta, x, x1, 1_000_000, 100 + i)
        assert abs(est.estimate - quad) < 3.0 * est.stderr


# -- refraction ----------------------------------------------------------------


def test_call_base_threshold(call_ladder):
    problem, sol = call_ladder
    phi = math.sqrt(1.5)
    assert sol.thresholds[0] == pytest.approx(math.log(phi / (phi - 1.0)), abs=1e-9)


def test_ladder_strictly_decreasing(call_ladder, put_ladder):
    for _, sol in (call_ladder, put_ladder):
        x = sol.thresholds
        assert x[2] < x[1] < x[0]


def test_h_levels_nondecreasing(call_ladder, put_ladder):
    for _, sol in (call_ladder, put_ladder):
        nodes = sol.h_levels[0].nodes
        for lo, hi in zip(sol.h_levels[:-1], sol.h_levels[1:]):
            assert np.all(hi(nodes) >= lo(nodes) - 1e-12)


def test_first_value_level_matches_single_stop(call_ladder):
    problem, sol = call_ladder
    single = solve_single(problem.reward, problem.profile)
    # h is piecewise linear between grid nodes ~3e-3 apart, worth about 1e-6 relative
    for x in (-0.5, 0.0, 1.0, 2.0):
        assert sol.value_levels[0](x) == pytest.approx(single.value(x), rel=5e-6)


def test_value_levels_stack(call_ladder):
    _, sol = call_ladder
    v1, v2, v3 = sol.value_levels
    for x in (-1.0, 0.0, 1.0, 1.5, 2.5):
        a, b, c = v1(x), v2(x), v3(x)
        assert a <= b + 1e-12 <= c + 2e-12
        assert b <= 2.0 * a + 1e-12 and c <= 3.0 * a + 1e-12


def test_one_level_is_single_stop():
    problem = RefractionProblem(BrownianDrift(0.0, 1.0), 0.75, 1.0, 1, CallLinear(1.0))
    sol = solve_refraction(problem)
    assert sol.thresholds == [pytest.approx(solve_single(CallLinear(1.0), problem.profile).x_star, abs=1e-12)]


def test_long_refraction_period_decouples():
    problem = RefractionProblem(BrownianDrift(0.0, 1.0), 0.75, 60.0, 2, CallLinear(1.0))
    sol = solve_refraction(problem)
    assert sol.thresholds[1] == pytest.approx(sol.thresholds[0], abs=1e-6)


def test_zero_prior_level_returns_base_h(call_ladder):
    problem, sol = call_ladder
    zero = GridFunction(sol.h_levels[0].nodes, np.zeros_like(sol.h_levels[0].nodes))
    nxt = refraction_step(zero, sol.thresholds[0], problem)
    np.testing.assert_allclose(nxt.values, problem.base_h(zero.nodes), atol=1e-14)


def test_call_without_finite_value_rejected():
    with pytest.raises(IntegrabilityError):
        RefractionProblem(BrownianDrift(0.0, 1.0), 0.05, 1.0, 3, CallLinear(1.0))


def test_refraction_runtime():
    import time

    t0 = time.perf_counter()
    solve_refraction(RefractionProblem(BrownianDrift(0.0, 1.0), 0.75, 1.0, 3, CallLinear(1.0)))
    assert time.perf_counter() - t0 < 5.0


# -- running costs ---------------------------------------------------------------


def test_running_reward_ladder(jump_model):
    sol = _running(jump_model, -0.02)
    x1, x2, x3 = sol.thresholds
    assert x1 == pytest.approx(0.7384, abs=5e-4)
    assert x2 == pytest.approx(0.6207, abs=5e-4)
    assert x3 == pytest.approx(0.6207, abs=5e-4)
    assert sol.cases == ["base", "i", "ii"]


def test_running_cost_ladder(jump_model):
    sol = _running(jump_model, 0.02)
    x1, x2, x3 = sol.thresholds
    assert (x1, x2, x3) == pytest.approx((0.5153, 0.5666, 0.5843), abs=5e-4)
    phi = phi_right_inverse(jump_model, 0.18)
    assert x3 <= math.log((phi + 1) / phi)
    assert sol.cases == ["base", "ii", "ii"]


def test_second_level_root_formula(jump_model):
    phi = phi_right_inverse(jump_model, 0.18)
    for c in (0.01, 0.02, 0.04):
        sol = _running(jump_model, c, n=2)
        expected = math.log(2 * (phi + 1) / (phi * (2 + c / 0.18)))
        assert sol.thresholds[1] == pytest.approx(expected, abs=1e-9)


def test_zero_cost_constant_ladder(jump_model):
    sol = _running(jump_model, 0.0, n=4)
    assert np.ptp(sol.thresholds) < 1e-9
    single = solve_single(PutLike(1.0), make_profile(ConstantRate(0.18), jump_model))
    assert sol.thresholds[0] == pytest.approx(single.x_star, abs=1e-12)


def test_dichotomy_in_cost(jump_model):
    """Running rewards pin the lower levels at x*; running costs push the ladder below it."""
    phi = phi_right_inverse(jump_model, 0.18)
    x_star = math.log((phi + 1) / phi)
    for c in (-0.05, -0.01):
        x = _running(jump_model, c).thresholds
        assert x[0] > x_star and x[1] == pytest.approx(x_star, abs=1e-9) and x[2] == pytest.approx(x_star, abs=1e-9)
    for c in (0.01, 0.05):
        x = _running(jump_model, c).thresholds
        assert x[0] < x[1] < x[2] < x_star


@pytest.mark.parametrize("level", [1, 2, 3])
@pytest.mark.parametrize("c", [-0.02, 0.02])
def test_g_level_representation(jump_model, level, c):
    sol = _running(jump_model, c)
    phi = phi_right_inverse(jump_model, 0.18)
    g = sol.diagnostics["g_levels"][level - 1]
    hg = sol.h_levels[level - 1]
    for x in (-0.3, 0.5, 1.2):
        assert float(g(x)) == pytest.approx(expected_h_of_max(hg, phi, x), abs=1e-9)


def test_running_value_dominates_lower_level(jump_model):
    sol = _running(jump_model, 0.02)
    for x in (-0.5, 0.2, 0.6, 1.5):
        vals = [float(v(x)) for v in sol.value_levels]
        assert vals[0] <= vals[1] <= vals[2]


def test_composition_rule_with_minus_infinity():
    hf = HTransform(lambda x: np.asarray(x, dtype=float) - 1.0, -math.inf, "t")
    prev = HTransform(lambda x: 2.0 * np.asarray(x, dtype=float), -math.inf, "t")
    h = running_cost_step(prev, -math.inf, hf)
    xs = np.array([-2.0, 0.0, 3.0])
    np.testing.assert_allclose(h(xs), 3.0 * xs - 1.0)


def test_exp_affine_running_cost(jump_model):
    prof = make_profile(ConstantRate(0.18), jump_model)
    cost = ExpAffine(0.02, ((0.005, 0.3),))
    sol = solve_running_cost(RunningCostProblem(prof, [PutLike(1.0)] * 2, [cost] * 2))
    assert len(sol.thresholds) == 2
    assert all(math.isfinite(x) for x in sol.thresholds)


@pytest.mark.slow
def test_two_exercise_ladder_beats_threshold_grid():
    """Brownian call, r = 0.75: the analytic pair wins against a 15 x 15 grid of rules."""
    from levy_stop.montecarlo import TwoStopOracle

    model = BrownianDrift(0.0, 1.0)
    sol = solve_refraction(RefractionProblem(model, 0.75, 1.0, 2, CallLinear(1.0)))
    a_ref, b_ref = sol.thresholds[1], sol.thresholds[0]
    oracle = TwoStopOracle(model, 0.75, 1.0, CallLinear(1.0), 0.0, 200_000, 5)
    at_ref = oracle.value(a_ref, b_ref)
    assert abs(at_ref.estimate - sol.value_levels[1](0.0)) < 3.0 * at_ref.stderr
    for a in a_ref + np.linspace(-0.6, 0.6, 15):
        for b in b_ref + np.linspace(-0.6, 0.6, 15):
            d = oracle.difference(a, b, a_ref, b_ref)
            assert d.estimate >= -3.0 * d.stderr, (a, b, d)
