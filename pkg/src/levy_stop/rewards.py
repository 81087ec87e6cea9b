"""Reward and running-cost families and the h-functions built from them.

A reward ``f`` satisfies the threshold representation when
``f(x) = E_x[h(Xbar_zeta)]`` for some ``h`` that is negative left of a point
``x*`` and nonnegative, nondecreasing to its right.  Two constructions of
``h`` are provided:

* :func:`h_transform` -- ``h = f - f'(x) / Lambda(x)``, valid for any
  discounting;
* :func:`mordecki_h` -- exact representation under constant-rate discounting
  for the exponential rewards, using ``Xbar_{e_r} ~ Exp(Phi(r))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .discounting import ConstantRate, HazardProfile
from .errors import DivergenceError, IntegrabilityError, ModelError
from .levy_model import LevyModel, phi_right_inverse


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


# ---------------------------------------------------------------------------
# rewards
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerPositivePart:
    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ModelError("PowerPositivePart needs alpha > 0")

    x_low = 0.0

    def f(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.maximum(x, 0.0) ** self.alpha)

    def f_prime(self, x):
        """Right derivative, i.e. the right-continuous version at the kink."""
        x = np.asarray(x, dtype=float)
        xp = np.where(x > 0.0, x, 1.0)
        return _out(np.where(x > 0.0, self.alpha * xp ** (self.alpha - 1.0), 0.0))

    def log_f(self, x: float) -> float:
        return self.alpha * math.log(x) if x > 0.0 else -math.inf

    def tail_basis(self) -> List[Callable]:
        a = self.alpha
        return [np.ones_like, lambda x: x**a, lambda x: x ** (a - 1.0)]


@dataclass(frozen=True)
class IdentityPositive:
    x_low = 0.0

    def f(self, x):
        return _out(np.maximum(np.asarray(x, dtype=float), 0.0))

    def f_prime(self, x):
        return _out(np.where(np.asarray(x, dtype=float) >= 0.0, 1.0, 0.0))

    def log_f(self, x: float) -> float:
        return math.log(x) if x > 0.0 else -math.inf

    def tail_basis(self) -> List[Callable]:
        return [np.ones_like, lambda x: x]


@dataclass(frozen=True)
class CallLinear:
    K1: float

    def __post_init__(self) -> None:
        if not self.K1 > 0.0:
            raise ModelError("CallLinear needs K1 > 0")

    @property
    def x_low(self) -> float:
        return math.log(self.K1)

    def f(self, x):
        return _out(np.exp(np.asarray(x, dtype=float)) - self.K1)

    def f_prime(self, x):
        return _out(np.exp(np.asarray(x, dtype=float)))

    def log_f(self, x: float) -> float:
        if x <= self.x_low:
            return -math.inf
        return x + math.log(-math.expm1(self.x_low - x))

    def tail_basis(self) -> List[Callable]:
        return [np.ones_like, np.exp]


@dataclass(frozen=True)
class PutLike:
    K2: float

    def __post_init__(self) -> None:
        if not self.K2 > 0.0:
            raise ModelError("PutLike needs K2 > 0")

    x_low = -math.inf

    def f(self, x):
        return _out(self.K2 - np.exp(-np.asarray(x, dtype=float)))

    def f_prime(self, x):
        return _out(np.exp(-np.asarray(x, dtype=float)))

    def log_f(self, x: float) -> float:
        val = self.K2 - math.exp(-x)
        return math.log(val) if val > 0.0 else -math.inf

    def tail_basis(self) -> List[Callable]:
        return [np.ones_like, lambda x: np.exp(-x)]


@dataclass(frozen=True)
class ConvexCombo:
    weights: Tuple[float, ...]
    components: Tuple[Union[CallLinear, PutLike], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.weights) != len(self.components) or not self.components:
            raise ModelError("ConvexCombo needs one positive weight per component")
        if any(not w > 0.0 for w in self.weights):
            raise ModelError("ConvexCombo weights must be positive")
        if any(not isinstance(c, (CallLinear, PutLike)) for c in self.components):
            raise ModelError("ConvexCombo components must be CallLinear or PutLike")

    @property
    def x_low(self) -> float:
        return -math.inf

    def f(self, x):
        return _out(sum(w * np.asarray(c.f(x)) for w, c in zip(self.weights, self.components)))

    def f_prime(self, x):
        return _out(sum(w * np.asarray(c.f_prime(x)) for w, c in zip(self.weights, self.components)))

    def log_f(self, x: float) -> float:
        val = float(self.f(x))
        if val <= 0.0:
            return -math.inf
        if math.isfinite(val):
            return math.log(val)
        # overflow: the exponential call parts dominate
        logs = [
            math.log(w) + c.log_f(x) for w, c in zip(self.weights, self.components) if isinstance(c, CallLinear)
        ]
        return float(np.logaddexp.reduce(logs))

    def tail_basis(self) -> List[Callable]:
        basis = [np.ones_like]
        if any(isinstance(c, CallLinear) for c in self.components):
            basis.append(np.exp)
        if any(isinstance(c, PutLike) for c in self.components):
            basis.append(lambda x: np.exp(-x))
        return basis


Reward = Union[PowerPositivePart, IdentityPositive, CallLinear, PutLike, ConvexCombo]


# ---------------------------------------------------------------------------
# running costs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantCost:
    c: float

    def __call__(self, x):
        return _out(np.full(np.shape(x), float(self.c)))


@dataclass(frozen=True)
class ExpAffine:
    """C(x) = -L + sum_i c_i exp(alpha_i x)."""

    L: float
    terms: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple((float(c), float(a)) for c, a in self.terms))
        if self.L < 0.0:
            raise ModelError("ExpAffine needs L >= 0")
        if any(not (c > 0.0 and a > 0.0) for c, a in self.terms):
            raise ModelError("ExpAffine terms need c_i > 0 and alpha_i > 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return _out(-self.L + sum(c * np.exp(a * x) for c, a in self.terms))


CostFunction = Union[ConstantCost, ExpAffine]


# ---------------------------------------------------------------------------
# h-functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HTransform:
    """A vectorised function h with a lower domain bound and a provenance tag."""

    fn: Callable = field(repr=False)
    x_low: float = -math.inf
    provenance: str = "analytic-ODE"
    phi_hint: float = 1.0

    def __call__(self, x):
        return self.fn(x)


def h_transform(f: Reward, profile: HazardProfile) -> HTransform:
    """h(x) = f(x) - f'(x) / Lambda(x) (right-continuous version at kinks).

    Lambda is only consulted where f' is nonzero, so positive-part rewards
    are evaluable on the whole line even when the hazard rate is not.
    """

    def fn(x):
        x_arr = np.asarray(x, dtype=float)
        fx = np.asarray(f.f(x_arr), dtype=float)
        dfx = np.asarray(f.f_prime(x_arr), dtype=float)
        active = dfx != 0.0
        out = fx.copy()
        if np.any(active):
            lam = np.asarray(profile.hazard(x_arr[active] if x_arr.ndim else x_arr), dtype=float)
            if x_arr.ndim:
                out[active] = fx[active] - dfx[active] / lam
            else:
                out = fx - dfx / lam
        return _out(out)

    return HTransform(fn, float(f.x_low), "analytic-ODE", max(profile.phi_r, 1.0))


def _mordecki_pieces(f: Reward, phi: float) -> List[Tuple[float, float, float]]:
    """h as sum of (const, coef, exponent) triples const + coef * exp(exponent x)."""
    if isinstance(f, CallLinear):
        if not phi > 1.0:
            raise IntegrabilityError(
                f"E[exp(Xbar)] is infinite: Phi(r) = {phi:.6g} <= 1 for a CallLinear reward"
            )
        return [(-f.K1, (phi - 1.0) / phi, 1.0)]
    if isinstance(f, PutLike):
        return [(f.K2, -(phi + 1.0) / phi, -1.0)]
    if isinstance(f, ConvexCombo):
        pieces = []
        for w, comp in zip(f.weights, f.components):
            pieces += [(w * k, w * a, e) for k, a, e in _mordecki_pieces(comp, phi)]
        return pieces
    raise ModelError("the exact constant-rate representation needs CallLinear, PutLike or ConvexCombo")


def mordecki_h(f: Reward, model: LevyModel, r: float) -> HTransform:
    """Exact h with f(x) = E[h(x + Xbar_{e_r})], Xbar_{e_r} ~ Exp(Phi(r))."""
    phi = phi_right_inverse(model, r)
    pieces = _mordecki_pieces(f, phi)

    def fn(x):
        x_arr = np.asarray(x, dtype=float)
        return _out(sum(k + a * np.exp(e * x_arr) for k, a, e in pieces))

    x_low = f.x_low if isinstance(f, CallLinear) else -math.inf
    return HTransform(fn, x_low, "mordecki-exact", max(phi, 1.0))


def expected_h_of_max(h: HTransform, phi: float, x: float) -> float:
    """E[h(x + Y)] with Y ~ Exp(phi), by quadrature; used to verify representations.

    Past y = 700/phi the density is below 1e-300 and exponential h would
    overflow, so the integral stops there.
    """
    from scipy import integrate

    def integrand(y):
        with np.errstate(over="ignore", invalid="ignore"):
            val = phi * math.exp(-phi * y) * float(h(x + y))
        return val if math.isfinite(val) else 0.0

    val, _ = integrate.quad(integrand, 0.0, 700.0 / phi, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


@dataclass(frozen=True)
class Perpetuity:
    """Cbar(x) = -L/r + sum_i k_i exp(alpha_i x), and its representative h_c."""

    const: float
    terms: Tuple[Tuple[float, float], ...]
    phi: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return _out(self.const + sum(k * np.exp(a * x) for k, a in self.terms) + 0.0 * x)

    def h(self, x):
        x = np.asarray(x, dtype=float)
        return _out(
            self.const + sum(k * (self.phi - a) / self.phi * np.exp(a * x) for k, a in self.terms) + 0.0 * x
        )

    def h_prime(self, x):
        x = np.asarray(x, dtype=float)
        return _out(sum(k * (self.phi - a) / self.phi * a * np.exp(a * x) for k, a in self.terms) + 0.0 * x)


def cost_perpetuity(cost: CostFunction, model: LevyModel, r: float) -> Tuple[Perpetuity, HTransform]:
    """Cbar(x) = E_x[int_0^inf e^{-rt} C(X_t) dt] and its threshold representative."""
    phi = phi_right_inverse(model, r)
    if isinstance(cost, ConstantCost):
        perp = Perpetuity(cost.c / r, (), phi)
    else:
        terms = []
        for c, a in cost.terms:
            psi_a = model.psi(a)
            if psi_a >= r:
                raise DivergenceError(f"perpetuity diverges: psi({a:.6g}) = {psi_a:.6g} >= r = {r:.6g}")
            if a >= phi:
                raise IntegrabilityError(f"E[exp({a:.6g} Xbar)] is infinite since alpha >= Phi(r) = {phi:.6g}")
            terms.append((c / (r - psi_a), a))
        perp = Perpetuity(-cost.L / r, tuple(terms), phi)
    return perp, HTransform(perp.h, -math.inf, "perpetuity", max(phi, 1.0))


# ---------------------------------------------------------------------------
# shape check
# ---------------------------------------------------------------------------


@dataclass
class ConditionMReport:
    """Outcome of scanning h on a grid.

    ``kind`` is ``"crossing"`` (one negative-to-positive change),
    ``"all_positive"`` or ``"all_nonpositive"``; ``x_star_bracket`` is the grid
    cell containing the crossing.
    """

    lower: float
    upper: float
    step: float
    kind: str
    x_star_bracket: Optional[Tuple[float, float]]
    single_crossing_ok: bool
    monotone_ok: bool
    n_sign_changes: int
    flat_zero_width: float = 0.0

    @property
    def ok(self) -> bool:
        return self.single_crossing_ok and self.monotone_ok

    def to_dict(self) -> dict:
        lo, hi = self.x_star_bracket if self.x_star_bracket else (math.nan, math.nan)
        return {
            "condition_m_kind": self.kind,
            "condition_m_bracket_lo": lo,
            "condition_m_bracket_hi": hi,
            "condition_m_single_crossing": int(self.single_crossing_ok),
            "condition_m_monotone": int(self.monotone_ok),
            "condition_m_sign_changes": self.n_sign_changes,
            "condition_m_scan_lower": self.lower,
            "condition_m_scan_upper": self.upper,
        }


SCAN_STEP = 1e-3
MONOTONE_TOL = -1e-10


def default_scan_domain(h: HTransform) -> Tuple[float, float]:
    lower = max(h.x_low, -10.0) if math.isfinite(h.x_low) else -10.0
    upper = 50.0 / max(h.phi_hint, 1.0)
    return lower, max(upper, lower + 1.0)


def _scan_values(h: HTransform, lower: float, upper: float, step: float):
    n = int(math.ceil((upper - lower) / step))
    # skip the left endpoint when it is a support boundary (kink or singular hazard)
    xs = lower + step * np.arange(1, n + 1)
    with np.errstate(all="ignore"):
        hs = np.asarray(h(xs), dtype=float)
    return xs, hs


def condition_m_check(
    h: HTransform, lower: Optional[float] = None, upper: Optional[float] = None, step: float = SCAN_STEP
) -> ConditionMReport:
    """Scan h for a single negative-to-positive sign change.

    When h is still nonpositive and rising at the upper cap the scan window is
    doubled (a few times) before concluding that h never crosses.
    """
    d_lower, d_upper = default_scan_domain(h)
    lower = d_lower if lower is None else lower
    upper = d_upper if upper is None else upper
    xs, hs = _scan_values(h, lower, upper, step)
    for _ in range(6):
        if hs[-1] > 0.0 or not (hs[-1] > hs[-2] + 1e-14):
            break
        width = upper - lower
        more_x, more_h = _scan_values(h, upper, upper + width, step * 2.0 ** (_ + 1))
        xs = np.concatenate([xs, more_x])
        hs = np.concatenate([hs, more_h])
        upper = upper + width
    finite = np.isfinite(hs)
    xs, hs = xs[finite], hs[finite]
    positive = hs > 0.0
    changes = int(np.count_nonzero(positive[1:] != positive[:-1]))
    if changes == 0:
        kind = "all_positive" if positive[0] else "all_nonpositive"
        bracket = None
        crossing_ok = True
        start = 0 if positive[0] else len(hs)
    else:
        idx = int(np.argmax(positive))
        kind = "crossing"
        bracket = (float(xs[idx - 1]), float(xs[idx])) if idx > 0 else None
        crossing_ok = changes == 1 and not positive[0]
        start = idx
    tail = hs[start:]
    monotone_ok = bool(np.all(np.diff(tail) >= MONOTONE_TOL)) if tail.size > 1 else True
    zero_width = 0.0
    if bracket is not None:
        flat = (np.abs(hs[:start]) <= 1e-12)
        zero_width = float(np.count_nonzero(flat) * step)
    return ConditionMReport(
        lower, upper, step, kind, bracket, crossing_ok, monotone_ok, changes, zero_width
    )


def reward_to_dict(f: Reward) -> dict:
    if isinstance(f, PowerPositivePart):
        return {"type": "power_positive_part", "alpha": f.alpha}
    if isinstance(f, IdentityPositive):
        return {"type": "identity_positive"}
    if isinstance(f, CallLinear):
        return {"type": "call_linear", "K1": f.K1}
    if isinstance(f, PutLike):
        return {"type": "put_like", "K2": f.K2}
    return {
        "type": "convex_combo",
        "weights": list(f.weights),
        "components": [reward_to_dict(c) for c in f.components],
    }


def cost_to_dict(c: CostFunction) -> dict:
    if isinstance(c, ConstantCost):
        return {"type": "constant", "c": c.c}
    return {"type": "exp_affine", "L": c.L, "terms": [[ci, ai] for ci, ai in c.terms]}


def uses_exact_representation(f: Reward, profile: HazardProfile) -> bool:
    """True when the exact constant-rate representation applies."""
    if not isinstance(profile.disc, ConstantRate):
        return False
    if isinstance(f, PutLike):
        return True
    if isinstance(f, (CallLinear, ConvexCombo)):
        calls = [f] if isinstance(f, CallLinear) else [c for c in f.components if isinstance(c, CallLinear)]
        return not calls or profile.phi_r > 1.0
    return False


def representative_h(f: Reward, profile: HazardProfile) -> HTransform:
    """The h used by the solver: exact under constant rate where possible."""
    if uses_exact_representation(f, profile):
        return mordecki_h(f, profile.model, profile.disc.r)
    return h_transform(f, profile)


def sum_h(parts: Sequence[HTransform], x_low: Optional[float] = None) -> HTransform:
    def fn(x):
        return _out(sum(np.asarray(p(x), dtype=float) for p in parts))

    lo = max(p.x_low for p in parts) if x_low is None else x_low
    return HTransform(fn, lo, "+".join(p.provenance for p in parts), max(p.phi_hint for p in parts))
