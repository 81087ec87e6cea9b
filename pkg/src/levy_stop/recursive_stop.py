"""Multiple stopping: refraction-period recursion and running-cost recursion.

Refraction (constant discount rate r, waiting time delta between exercises)::

    h^(1) = h
    h^(l+1)(x) = h(x) + exp(-r delta) E[h^(l)(x + X_delta) 1{x + X_delta > x_l*}]

where x_l* is the sign change of h^(l).  The h-levels are carried on a
:class:`GridFunction`.

Running cost (cost C_l paid while waiting for the l-th exercise)::

    h_g^(1) = h_f^(1)
    h_g^(k+1)(x) = h_f^(k+1)(x) + h_g^(k)(x) 1{x > x_k*}

with h_f^(l) the representative of Cbar_l - Cbar_{l-1} + f_l.  This one is
pure algebra on closed-form pieces, so no grid is involved.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate, optimize, stats

from .discounting import ConstantRate, HazardProfile, make_profile
from .errors import (
    ConditionMViolation,
    ConsistencyError,
    GridExtensionError,
    IntegrabilityError,
    ModelError,
    UnsupportedError,
)
from .levy_model import BrownianDrift, CramerLundbergExp, LevyModel
from .rewards import (
    CallLinear,
    ConstantCost,
    ConvexCombo,
    CostFunction,
    HTransform,
    Reward,
    condition_m_check,
    cost_perpetuity,
    representative_h,
)
from .single_stop import solve_threshold

log = logging.getLogger(__name__)

GRID_NODES = 4001
GRID_HALF_WIDTH = 8.0  # in units of 1/Phi(r)
NORMAL_NODES = 96
NORMAL_CUT = 10.0
GAMMA_NODES = 64
POISSON_TAIL = 1e-12
TAIL_FIT_NODES = 24
CASE_TOL = 1e-8
AUX_SPACING = 2e-3


# ---------------------------------------------------------------------------
# grid functions
# ---------------------------------------------------------------------------


@dataclass
class GridFunction:
    """Piecewise-linear function on strictly increasing nodes.

    Left of the first node the first value is used.  Right of the last node
    the function follows a least-squares fit of ``basis`` to the last
    :data:`TAIL_FIT_NODES` nodes (for instance ``a + b e^x`` for a call).
    """

    nodes: np.ndarray
    values: np.ndarray
    basis: Sequence[Callable] = (np.ones_like,)
    tail_coef: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.nodes.ndim != 1 or self.nodes.shape != self.values.shape:
            raise ValueError("nodes and values must be 1-d arrays of equal length")
        if np.any(np.diff(self.nodes) <= 0.0):
            raise ValueError("grid nodes must be strictly increasing")
        if self.tail_coef is None:
            xs = self.nodes[-TAIL_FIT_NODES:]
            design = np.column_stack([np.asarray(b(xs), dtype=float) for b in self.basis])
            self.tail_coef, *_ = np.linalg.lstsq(design, self.values[-TAIL_FIT_NODES:], rcond=None)

    @property
    def left(self) -> float:
        return float(self.nodes[0])

    @property
    def right(self) -> float:
        return float(self.nodes[-1])

    def right_tail(self, x):
        x = np.asarray(x, dtype=float)
        return sum(c * np.asarray(b(x), dtype=float) for c, b in zip(self.tail_coef, self.basis))

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        inside = np.interp(x_arr, self.nodes, self.values)
        beyond = x_arr > self.right
        if np.any(beyond):
            with np.errstate(over="ignore"):
                inside = np.where(beyond, self.right_tail(np.where(beyond, x_arr, self.right)), inside)
        return float(inside) if np.ndim(inside) == 0 else inside


# ---------------------------------------------------------------------------
# expectations over the increment X_delta
# ---------------------------------------------------------------------------


def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


class IncrementLaw:
    """E[g(x + X_delta) 1{x + X_delta > c}] for the supported models.

    Brownian part: Gauss-Legendre on the standard normal variable over
    ``[max(u0, -10), 10]`` where ``u0`` is the indicator cut-off, so the
    discontinuity never sits inside a quadrature panel.  Exponential jumps:
    Poisson mixture over the jump count, with the Gamma(k, rho) jump sum
    integrated by Gauss-Legendre on its central support.
    """

    def __init__(self, model: LevyModel, delta: float) -> None:
        if not isinstance(model, (BrownianDrift, CramerLundbergExp)):
            raise UnsupportedError("the refraction recursion supports BrownianDrift and CramerLundbergExp")
        self.model = model
        self.delta = delta
        self.drift = model.mu * delta
        self.sd = model.sigma * math.sqrt(delta)
        self.gl_t, self.gl_w = _legendre(NORMAL_NODES)
        self.jumps: List[tuple] = []
        if isinstance(model, CramerLundbergExp) and model.jump_rate > 0.0:
            mean = model.jump_rate * delta
            k_max = int(stats.poisson.isf(POISSON_TAIL, mean)) + 1
            s_t, s_w = _legendre(GAMMA_NODES)
            for k in range(1, k_max + 1):
                pk = float(stats.poisson.pmf(k, mean))
                lo = float(stats.gamma.ppf(1e-14, k, scale=1.0 / model.jump_decay))
                hi = float(stats.gamma.isf(1e-14, k, scale=1.0 / model.jump_decay))
                s = 0.5 * (hi - lo) * s_t + 0.5 * (hi + lo)
                w = 0.5 * (hi - lo) * s_w * stats.gamma.pdf(s, k, scale=1.0 / model.jump_decay)
                self.jumps.append((pk, s, w))
            self.p0 = float(stats.poisson.pmf(0, mean))
        else:
            self.p0 = 1.0

    def _gauss_part(self, g: Callable, y: np.ndarray, c: float) -> np.ndarray:
        """E[g(y + sd Z) 1{y + sd Z > c}] for each y, Z standard normal."""
        y = np.asarray(y, dtype=float)
        if self.sd == 0.0:
            return np.where(y > c, g(y), 0.0)
        u0 = np.clip((c - y) / self.sd, -NORMAL_CUT, NORMAL_CUT)
        half = 0.5 * (NORMAL_CUT - u0)
        mid = 0.5 * (NORMAL_CUT + u0)
        u = mid[..., None] + half[..., None] * self.gl_t
        vals = g(y[..., None] + self.sd * u) * np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
        return half * (vals @ self.gl_w)

    def expect_above(self, g: Callable, x, c: float):
        x = np.asarray(x, dtype=float)
        base = x + self.drift
        total = self.p0 * self._gauss_part(g, base, c)
        if not self.jumps:
            return total
        if self.sd == 0.0:
            for pk, s, w in self.jumps:
                total = total + pk * (self._gauss_part(g, base[..., None] - s, c) @ w)
            return total
        # With a Brownian part the inner expectation is smooth in its
        # argument, so it is tabulated once and read off a cubic spline for
        # every (x, jump sum) pair.
        s_max = max(float(s.max()) for _, s, _ in self.jumps)
        lo, hi = float(base.min()) - s_max, float(base.max())
        n_aux = int(min(max((hi - lo) / AUX_SPACING, 16), 40000)) + 1
        ys = np.linspace(lo, hi, n_aux)
        inner = interpolate.CubicSpline(ys, self._gauss_part(g, ys, c))
        for pk, s, w in self.jumps:
            total = total + pk * (inner(base[..., None] - s) @ w)
        return total


# ---------------------------------------------------------------------------
# refraction recursion
# ---------------------------------------------------------------------------


@dataclass
class RefractionProblem:
    model: LevyModel
    r: float
    delta: float
    n: int
    reward: Reward
    grid_nodes: int = GRID_NODES
    grid_half_width: float = GRID_HALF_WIDTH

    def __post_init__(self) -> None:
        if not isinstance(self.model, (BrownianDrift, CramerLundbergExp)):
            raise UnsupportedError("refraction needs a BrownianDrift or CramerLundbergExp model")
        if not (self.r > 0.0 and self.delta > 0.0 and self.n >= 1):
            raise ModelError("refraction needs r > 0, delta > 0 and n >= 1")
        calls = isinstance(self.reward, CallLinear) or (
            isinstance(self.reward, ConvexCombo) and any(isinstance(c, CallLinear) for c in self.reward.components)
        )
        if calls and not self.model.psi(1.0) < self.r:
            raise IntegrabilityError(
                f"E[exp(X_1)] = exp({self.model.psi(1.0):.6g}) is not below exp(r) = exp({self.r:.6g}); "
                "a call-type reward has infinite value"
            )
        self.profile = make_profile(ConstantRate(self.r), self.model)
        self.base_h = representative_h(self.reward, self.profile)


@dataclass
class RecursiveSolution:
    kind: str
    thresholds: List[float]
    h_levels: List[Callable]
    value_levels: List[Callable]
    cases: List[str]
    xbar: List[float]
    diagnostics: dict = field(default_factory=dict)

    def ladder_rows(self):
        return [
            (l + 1, self.thresholds[l], self.cases[l], self.xbar[l]) for l in range(len(self.thresholds))
        ]


def refraction_step(
    hl: GridFunction, xl_star: float, problem: RefractionProblem, law: Optional[IncrementLaw] = None
) -> GridFunction:
    """Next h-level on the nodes of ``hl``."""
    law = law or IncrementLaw(problem.model, problem.delta)
    if xl_star < hl.left:
        raise GridExtensionError(
            f"threshold {xl_star:.6g} lies below the grid start {hl.left:.6g}", side="left"
        )
    cont = _continuation(hl, xl_star, problem, law, hl.nodes)
    values = np.asarray(problem.base_h(hl.nodes), dtype=float) + cont
    return GridFunction(hl.nodes, values, problem.reward.tail_basis())


def _continuation(hl, xl_star, problem, law, x):
    if xl_star == math.inf:
        return np.zeros_like(np.asarray(x, dtype=float))
    cut = xl_star if math.isfinite(xl_star) else -1e300
    return math.exp(-problem.r * problem.delta) * law.expect_above(hl, x, cut)


def _crossing(fn: Callable, nodes: np.ndarray, values: np.ndarray) -> tuple:
    """Rightmost sign change of values; refined with brentq on fn."""
    positive = values > 0.0
    changes = int(np.count_nonzero(positive[1:] != positive[:-1]))
    if changes == 0:
        return (-math.inf if positive[0] else math.inf), 0, 0.0
    if changes > 1 or positive[0]:
        raise ConditionMViolation(f"h-level has {changes} sign changes on the grid")
    i = int(np.argmax(positive))
    a, b = float(nodes[i - 1]), float(nodes[i])
    fa = float(fn(a))
    if fa == 0.0:
        root = a
    else:
        root = optimize.brentq(fn, a, b, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    flat = float(np.count_nonzero(np.abs(values[:i]) <= 1e-12) * (nodes[1] - nodes[0]))
    if flat > 0.0:
        log.info("h-level has a flat zero segment of width %.3g; using its right end", flat)
    return root, changes, flat


def _build_grid(problem: RefractionProblem, center: float, half_width: float) -> np.ndarray:
    return np.linspace(center - half_width, center + half_width, problem.grid_nodes)


def solve_refraction(problem: RefractionProblem, max_extensions: int = 4) -> RecursiveSolution:
    phi = problem.profile.phi_r
    base_report = condition_m_check(problem.base_h)
    x1 = solve_threshold(problem.base_h, base_report)
    if not math.isfinite(x1):
        raise ConditionMViolation("the base h has no finite crossing", base_report)
    half = problem.grid_half_width / max(phi, 1.0)
    law = IncrementLaw(problem.model, problem.delta)
    for attempt in range(max_extensions + 1):
        nodes = _build_grid(problem, x1, half)
        try:
            return _run_refraction(problem, law, nodes, x1)
        except GridExtensionError as exc:
            log.info("extending refraction grid (%s)", exc)
            half *= 2.0
    raise GridExtensionError("refraction grid could not be extended far enough")


def _run_refraction(problem, law, nodes, x1) -> RecursiveSolution:
    basis = problem.reward.tail_basis()
    h_grid = GridFunction(nodes, np.asarray(problem.base_h(nodes), dtype=float), basis)
    levels = [h_grid]
    thresholds = [x1]
    flats = [0.0]
    for _ in range(problem.n - 1):
        prev, prev_x = levels[-1], thresholds[-1]
        nxt = refraction_step(prev, prev_x, problem, law)

        def pointwise(x, prev=prev, prev_x=prev_x):
            return float(problem.base_h(x)) + float(_continuation(prev, prev_x, problem, law, np.array([x]))[0])

        root, _, flat = _crossing(pointwise, nxt.nodes, nxt.values)
        if not math.isfinite(root):
            raise ConditionMViolation("an h-level has no crossing on the refraction grid")
        if root < nodes[0] + 0.05 * (nodes[-1] - nodes[0]):
            raise GridExtensionError("threshold too close to the left end of the grid", side="left")
        levels.append(nxt)
        thresholds.append(root)
        flats.append(flat)
    phi = problem.profile.phi_r
    values = [_refraction_value(g, x, phi) for g, x in zip(levels, thresholds)]
    return RecursiveSolution(
        "refraction",
        thresholds,
        levels,
        values,
        ["refraction"] * len(thresholds),
        [math.nan] * len(thresholds),
        {"grid_left": float(nodes[0]), "grid_right": float(nodes[-1]), "grid_nodes": len(nodes), "flat_widths": flats},
    )


def _linear_piece(h_a: float, slope: float, d, phi: float):
    """int_0^d exp(-phi t) (h_a + slope t) dt."""
    e = np.exp(-phi * d)
    return h_a * (1.0 - e) / phi + slope * (1.0 - e * (1.0 + phi * d)) / phi**2


def _refraction_value(h_level: GridFunction, x_star: float, phi: float) -> Callable:
    """v(x) = E[h_level(x + Y) 1{x + Y > x_star}] with Y ~ Exp(phi).

    With m = max(x, x_star) this is phi exp(-phi (m - x)) K(m), where
    K(a) = int_a^inf exp(-phi (u - a)) h_level(u) du.  h_level is piecewise
    linear on its grid, so K is integrated exactly node by node from the
    right; only the fitted tail beyond the grid needs a quadrature.
    """
    nodes, vals = h_level.nodes, h_level.values
    right = h_level.right

    def tail_from(a: float) -> float:
        def integrand(t):
            with np.errstate(over="ignore", invalid="ignore"):
                val = math.exp(-phi * t) * float(h_level(a + t))
            return val if math.isfinite(val) else 0.0

        total = 0.0
        for lo, hi in ((0.0, 1.0 / phi), (1.0 / phi, 700.0 / phi)):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                part, _ = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=400)
            total += part
        return total

    widths = np.diff(nodes)
    slopes = np.diff(vals) / widths
    pieces = _linear_piece(vals[:-1], slopes, widths, phi)
    decay = np.exp(-phi * widths)
    k_nodes = np.empty_like(vals)
    k_nodes[-1] = tail_from(right)
    for i in range(len(nodes) - 2, -1, -1):
        k_nodes[i] = pieces[i] + decay[i] * k_nodes[i + 1]

    def k_at(a: float) -> float:
        if a >= right:
            return tail_from(a)
        if a <= nodes[0]:
            d = nodes[0] - a
            return float(_linear_piece(vals[0], 0.0, d, phi) + math.exp(-phi * d) * k_nodes[0])
        i = int(np.searchsorted(nodes, a, side="right")) - 1
        d = nodes[i + 1] - a
        h_a = vals[i] + slopes[i] * (a - nodes[i])
        return float(_linear_piece(h_a, slopes[i], d, phi) + math.exp(-phi * d) * k_nodes[i + 1])

    def value(x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x_arr)
        for i, xi in enumerate(x_arr):
            m = max(xi, x_star)
            out[i] = phi * math.exp(-phi * (m - xi)) * k_at(m)
        return float(out[0]) if np.ndim(x) == 0 else out

    return value


# ---------------------------------------------------------------------------
# running-cost recursion
# ---------------------------------------------------------------------------


@dataclass
class RunningCostProblem:
    profile: HazardProfile
    rewards: Sequence[Reward]
    costs: Sequence[CostFunction]

    def __post_init__(self) -> None:
        self.rewards = list(self.rewards)
        self.costs = list(self.costs)
        if len(self.rewards) != len(self.costs) or not self.rewards:
            raise ModelError("running-cost recursion needs one reward and one cost per level")
        zero = all(isinstance(c, ConstantCost) and c.c == 0.0 for c in self.costs)
        if not zero and not isinstance(self.profile.disc, ConstantRate):
            raise UnsupportedError("running costs are supported under constant-rate discounting only")
        if zero:
            self.perpetuities = [None] * len(self.costs)
        else:
            self.perpetuities = [cost_perpetuity(c, self.profile.model, self.profile.disc.r)[0] for c in self.costs]

    @property
    def n(self) -> int:
        return len(self.rewards)

    def cbar(self, level: int, x):
        """Cbar_level(x), with Cbar_0 = 0."""
        if level == 0 or self.perpetuities[level - 1] is None:
            return np.zeros_like(np.asarray(x, dtype=float)) + 0.0
        return np.asarray(self.perpetuities[level - 1](x), dtype=float)

    def h_f(self, level: int) -> HTransform:
        """Representative of Cbar_level - Cbar_{level-1} + f_level."""
        hf = representative_h(self.rewards[level - 1], self.profile)
        cur = self.perpetuities[level - 1]
        prev = self.perpetuities[level - 2] if level >= 2 else None

        def fn(x):
            out = np.asarray(hf(x), dtype=float)
            if cur is not None:
                out = out + np.asarray(cur.h(x), dtype=float)
            if prev is not None:
                out = out - np.asarray(prev.h(x), dtype=float)
            return float(out) if np.ndim(out) == 0 else out

        return HTransform(fn, hf.x_low, hf.provenance + "+perpetuity", hf.phi_hint)


def running_cost_step(hg_prev: Callable, xk_star: float, hf_next: HTransform) -> HTransform:
    """h_g^(k+1)(x) = h_f^(k+1)(x) + h_g^(k)(x) 1{x > x_k*}."""

    def fn(x):
        x_arr = np.asarray(x, dtype=float)
        on = x_arr > xk_star
        prev = np.zeros_like(x_arr)
        if np.any(on):
            prev = np.where(on, np.asarray(hg_prev(x_arr), dtype=float), 0.0)
        out = np.asarray(hf_next(x_arr), dtype=float) + prev
        return float(out) if np.ndim(out) == 0 else out

    x_low = hf_next.x_low
    return HTransform(fn, x_low, "running-cost", hf_next.phi_hint)


def _classify(xbar: float, x_prev: float, x_k: float) -> str:
    if xbar < x_prev:
        if abs(x_k - xbar) > CASE_TOL:
            raise ConsistencyError(f"case (i) needs x_k* = xbar_k* but got {x_k:.12g} vs {xbar:.12g}")
        return "i"
    if not (x_prev - CASE_TOL <= x_k <= xbar + CASE_TOL):
        raise ConsistencyError(
            f"case (ii) needs {x_prev:.12g} <= x_k* <= {xbar:.12g} but got x_k* = {x_k:.12g}"
        )
    return "ii"


def solve_running_cost(problem: RunningCostProblem) -> RecursiveSolution:
    profile = problem.profile
    thresholds: List[float] = []
    xbars: List[float] = []
    cases: List[str] = []
    hg_levels: List[HTransform] = []
    for level in range(1, problem.n + 1):
        hf = problem.h_f(level)
        xbar = solve_threshold(hf)
        if level == 1:
            hg = hf
            x_k = xbar
            case = "base"
        else:
            hg = running_cost_step(hg_levels[-1], thresholds[-1], hf)
            x_k = solve_threshold(hg)
            case = _classify(xbar, thresholds[-1], x_k)
        thresholds.append(x_k)
        xbars.append(xbar)
        cases.append(case)
        hg_levels.append(hg)

    g_hat = []  # g_hat[l-1](x) = g^(l)(x v x_l*) * survival(x, x v x_l*)

    def make_g(level: int):
        prev_hat = g_hat[level - 2] if level >= 2 else None
        f = problem.rewards[level - 1]

        def g(x):
            x = np.asarray(x, dtype=float)
            out = problem.cbar(level, x) - problem.cbar(level - 1, x) + np.asarray(f.f(x), dtype=float)
            if prev_hat is not None:
                out = out + prev_hat(x)
            return out

        return g

    def make_hat(g, x_star):
        def hat(x):
            x = np.asarray(x, dtype=float)
            if x_star == math.inf:
                raise ConditionMViolation("running-cost level has no finite threshold")
            z = np.maximum(x, x_star)
            return g(z) * np.asarray(profile.survival(x, z), dtype=float)

        return hat

    g_levels = []
    for level in range(1, problem.n + 1):
        g = make_g(level)
        g_levels.append(g)
        g_hat.append(make_hat(g, thresholds[level - 1]))

    def make_value(level: int):
        hat = g_hat[level - 1]

        def v(x):
            out = -problem.cbar(level, x) + hat(x)
            return float(out) if np.ndim(out) == 0 else out

        return v

    values = [make_value(l) for l in range(1, problem.n + 1)]
    return RecursiveSolution(
        "running_cost",
        thresholds,
        hg_levels,
        values,
        cases,
        xbars,
        {"g_levels": g_levels},
    )
