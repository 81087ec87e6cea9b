"""Single optimal stopping problems solved by up-crossing thresholds.

Given a representative ``h`` with one sign change at ``x*``, the optimal rule
is to stop the first time the process exceeds ``x*`` and

    V(x) = f(x* v x) * P_x(Xbar_zeta > x* v x).

If ``h`` never becomes positive the threshold is ``+inf`` and the value is
``c0 * exp(I(0, x))`` with ``c0 = lim_z f(z) P_0(Xbar_zeta > z)``, which may
itself be infinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .discounting import HazardProfile
from .errors import ConditionMViolation, DomainError, InconclusiveError
from .rewards import ConditionMReport, HTransform, Reward, condition_m_check, representative_h

ROOT_TOL = 1e-10
DERIV_STEP = 1e-4
TAIL_RTOL = 1e-4
UNBOUNDED_LEVEL = 1e8


class _Unbounded:
    """Tag for an infinite value; never converted to a float silently."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNBOUNDED"

    def __str__(self) -> str:
        return "unbounded"

    def __float__(self) -> float:
        raise TypeError("an unbounded value has no float representation")


UNBOUNDED = _Unbounded()


def is_unbounded(value) -> bool:
    return value is UNBOUNDED


def solve_threshold(h: HTransform, report: Optional[ConditionMReport] = None) -> float:
    """Rightmost point where h <= 0, refined to 1e-10 inside the scan bracket."""
    if report is None:
        report = condition_m_check(h)
    if not report.ok:
        raise ConditionMViolation(
            f"h is not single-crossing and monotone ({report.n_sign_changes} sign changes, "
            f"monotone={report.monotone_ok})",
            report,
        )
    if report.kind == "all_positive":
        return -math.inf
    if report.kind == "all_nonpositive":
        return math.inf
    lo, hi = report.x_star_bracket
    while hi - lo > ROOT_TOL:
        mid = 0.5 * (lo + hi)
        if float(h(mid)) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _aitken(a: float, b: float, c: float) -> float:
    d1, d2 = b - a, c - b
    denom = d2 - d1
    if denom == 0.0 or not math.isfinite(denom):
        return c
    return c - d2 * d2 / denom


def compute_c0(f: Reward, profile: HazardProfile, max_z: float = 1e60) -> float:
    """lim_{z -> inf} f(z) exp(-I(0, z)), possibly +inf.

    The limit is approached slowly in the local-time examples (an error of
    order z^{-1/2}), so ``g(z)`` is sampled on a geometric sequence of
    ``z`` and accelerated with Aitken's delta-squared process.  A slow
    power-law decay z^p (p slightly below 0) leaves Aitken creeping towards
    0 without settling, so a settled negative local exponent also counts as
    a zero limit.
    """
    z = 20.0 / max(profile.phi_r, 1.0)
    gs = []
    limits = []
    scale = None
    while z <= max_z:
        log_g = f.log_f(z) - float(profile.log_survival_from_zero(z))
        g = math.exp(log_g) if log_g < 700.0 else math.inf
        gs.append(g)
        if scale is None and g > 0.0:
            scale = g
        if g == 0.0:
            return 0.0
        if len(gs) >= 3:
            rising = gs[-1] > gs[-2] > gs[-3]
            if rising and gs[-1] > UNBOUNDED_LEVEL:
                return math.inf
            limits.append(_aitken(gs[-3], gs[-2], gs[-1]))
            if len(gs) >= 5 and all(g > 0.0 for g in gs[-4:]):
                p = [math.log(gs[-k] / gs[-k - 1]) / math.log(4.0) for k in (1, 2, 3)]
                settled = all(abs(p[k] / p[k + 1] - 1.0) < 0.05 for k in (0, 1))
                if p[0] < -1e-3 and settled:
                    return 0.0
            if abs(gs[-1] - gs[-2]) <= TAIL_RTOL * abs(gs[-1]) and len(limits) >= 2 and abs(
                limits[-1] - limits[-2]
            ) <= TAIL_RTOL * abs(limits[-1]):
                return max(limits[-1], 0.0)
            if len(limits) >= 3:
                floor = 1e-12 * (scale or 1.0)
                spread = max(abs(limits[-1] - limits[-2]), abs(limits[-2] - limits[-3]))
                if spread <= TAIL_RTOL * max(abs(limits[-1]), floor):
                    val = limits[-1]
                    return 0.0 if abs(val) <= floor else max(val, 0.0)
        z *= 4.0
    raise InconclusiveError("f(z) P_0(Xbar_zeta > z) neither converged nor diverged")


@dataclass
class ThresholdSolution:
    x_star: float
    c0: float
    h: HTransform
    profile: HazardProfile
    f: Reward
    report: ConditionMReport
    smooth_fit_gap: Optional[float] = None

    @property
    def crossing_bracket(self) -> Optional[Tuple[float, float]]:
        return self.report.x_star_bracket

    @property
    def bounded(self) -> bool:
        return not (self.x_star == math.inf and self.c0 == math.inf)

    def value(self, x):
        return value_function(self, x)


def strategy_value(f: Reward, profile: HazardProfile, x, z):
    """Value of stopping at the first passage above z, started from x <= z."""
    return np.asarray(f.f(z)) * np.asarray(profile.survival(x, z))


def value_function(sol: ThresholdSolution, x):
    """V(x); returns :data:`UNBOUNDED` when the value is infinite."""
    x_arr = np.asarray(x, dtype=float)
    if sol.x_star == -math.inf:
        out = np.asarray(sol.f.f(x_arr), dtype=float)
    elif sol.x_star == math.inf:
        if sol.c0 == math.inf:
            return UNBOUNDED
        out = sol.c0 * np.exp(np.asarray(sol.profile.log_survival_from_zero(x_arr)))
    else:
        z = np.maximum(x_arr, sol.x_star)
        out = np.asarray(strategy_value(sol.f, sol.profile, x_arr, z), dtype=float)
    return float(out) if out.ndim == 0 else out


def smooth_fit_check(sol: ThresholdSolution, step: float = DERIV_STEP) -> float:
    """Relative gap between the one-sided derivatives of V at x*.

    Each one-sided derivative is a first-order difference improved by one
    Richardson step: ``2 D(step/2) - D(step)``.
    """
    if not math.isfinite(sol.x_star):
        raise DomainError("smooth fit is only defined at a finite threshold")
    xs = sol.x_star
    v0 = value_function(sol, xs)

    def left(hh):
        return (v0 - value_function(sol, xs - hh)) / hh

    def right(hh):
        return (value_function(sol, xs + hh) - v0) / hh

    d_left = 2.0 * left(step / 2.0) - left(step)
    d_right = 2.0 * right(step / 2.0) - right(step)
    return abs(d_left - d_right) / max(1.0, abs(d_right))


def threshold_sweep(sol: ThresholdSolution, x: float, n: int = 200, half_width: float = 1.0):
    """Grid of thresholds around x* (all >= x) and the strategy value at each."""
    lo = max(x, sol.x_star - half_width)
    hi = sol.x_star + half_width
    zs = np.linspace(lo, hi, n)
    return zs, np.asarray(strategy_value(sol.f, sol.profile, x, zs), dtype=float)


def solve_single(f: Reward, profile: HazardProfile, h: Optional[HTransform] = None) -> ThresholdSolution:
    """Threshold, c0, value function and smooth-fit diagnostic for one problem."""
    if h is None:
        h = representative_h(f, profile)
    report = condition_m_check(h)
    x_star = solve_threshold(h, report)
    c0 = compute_c0(f, profile)
    sol = ThresholdSolution(x_star, c0, h, profile, f, report)
    if math.isfinite(x_star):
        sol.smooth_fit_gap = smooth_fit_check(sol)
    return sol


def value_curve(sol: ThresholdSolution, xs) -> list:
    """Rows (x, f, V, h, region) for the value-curve CSV."""
    xs = np.asarray(xs, dtype=float)
    vals = value_function(sol, xs)
    rows = []
    with np.errstate(all="ignore"):
        hs = np.asarray(sol.h(xs), dtype=float)
    fs = np.asarray(sol.f.f(xs), dtype=float)
    for i, x in enumerate(xs):
        v = vals if is_unbounded(vals) else vals[i]
        region = "stop" if x >= sol.x_star else "continue"
        rows.append((float(x), float(fs[i]), v, float(hs[i]), region))
    return rows
