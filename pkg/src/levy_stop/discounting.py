"""Discounting by continuous additive functionals and the induced hazard rate.

The discount factor is ``exp(-A_t)`` for one of three additive functionals:

* :class:`ConstantRate` -- ``A_t = r t``;
* :class:`LocalTimeAtZero` -- ``A_t = r L_t`` with ``L`` the local time at 0
  (stable models only);
* :class:`OccupationNegative` -- ``A_t = r t + q * (time spent below 0)``.

Killing the process at ``zeta = inf{t : A_t > e}`` for an independent unit
exponential ``e`` turns the running maximum ``Xbar_zeta`` into a random
variable with hazard rate ``Lambda``:
``P_x(Xbar_zeta > z) = exp(-I(x, z))`` with ``I(x, z) = int_x^z Lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import integrate

from .errors import DomainError, ModelError, UnsupportedError
from .levy_model import LevyModel, StableSN, phi_right_inverse
from .scale_fn import ScaleFunction, build_scale


@dataclass(frozen=True)
class ConstantRate:
    r: float

    def __post_init__(self) -> None:
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise ModelError("ConstantRate needs r > 0")


@dataclass(frozen=True)
class LocalTimeAtZero:
    r: float

    def __post_init__(self) -> None:
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise ModelError("LocalTimeAtZero needs r > 0")


@dataclass(frozen=True)
class OccupationNegative:
    r: float
    q: float

    def __post_init__(self) -> None:
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise ModelError("OccupationNegative needs r > 0")
        if not (self.q > 0.0 and math.isfinite(self.q)):
            raise ModelError("OccupationNegative needs q > 0")


Discounting = Union[ConstantRate, LocalTimeAtZero, OccupationNegative]


def _scalar_or_array(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


@dataclass(frozen=True)
class HazardProfile:
    """Hazard rate and survival law of ``Xbar_zeta`` for a (model, discounting) pair.

    Build instances with :func:`make_profile`.  For occupation-time
    discounting the log-survival integral has the exact form
    ``I(x, z) = log J(z) - log J(x)`` where
    ``J(z) = int_0^inf exp(-Phi(r+q) y) W^(r)(z + y) dy``, so no quadrature
    or memo table is needed.
    """

    disc: Discounting
    model: LevyModel
    phi_r: float
    theta: Optional[float] = None
    scale: Optional[ScaleFunction] = field(default=None, repr=False)

    # -- hazard ----------------------------------------------------------
    def hazard(self, z):
        z_arr = np.asarray(z, dtype=float)
        d = self.disc
        if isinstance(d, ConstantRate):
            return _scalar_or_array(np.full(z_arr.shape, self.phi_r))
        if isinstance(d, LocalTimeAtZero):
            if np.any(z_arr <= 0.0):
                raise DomainError("the local-time hazard rate is only defined for z > 0")
            beta = self.model.beta
            g = math.gamma(beta)
            out = d.r * (beta - 1.0) * z_arr ** (beta - 2.0) / (g + d.r * z_arr ** (beta - 1.0))
            return _scalar_or_array(out)
        zpos = np.maximum(z_arr, 0.0)
        ratio = self.scale.w_scaled(zpos) / self.scale._tail_scaled_nonneg(self.theta, zpos)
        out = np.where(z_arr < 0.0, self.theta, self.theta - ratio)
        return _scalar_or_array(out)

    # -- integrated hazard -------------------------------------------------
    def log_survival_from_zero(self, z):
        """I(0, z), negative when z < 0."""
        z_arr = np.asarray(z, dtype=float)
        d = self.disc
        if isinstance(d, ConstantRate):
            out = self.phi_r * z_arr
        elif isinstance(d, LocalTimeAtZero):
            beta = self.model.beta
            g = math.gamma(beta)
            out = np.log1p(d.r * np.maximum(z_arr, 0.0) ** (beta - 1.0) / g)
        else:
            out = self.scale.log_tail_integral(self.theta, z_arr) - self._log_j0
        return _scalar_or_array(out)

    @property
    def _log_j0(self) -> float:
        return float(self.scale.log_tail_integral(self.theta, 0.0))

    def integrated_hazard(self, x, z):
        """I(x, z) = int_x^z Lambda(y) dy for z >= x."""
        x_arr = np.asarray(x, dtype=float)
        z_arr = np.asarray(z, dtype=float)
        if np.any(z_arr < x_arr):
            raise DomainError("survival needs z >= x")
        d = self.disc
        if isinstance(d, ConstantRate):
            out = self.phi_r * (z_arr - x_arr)
        else:
            out = self.log_survival_from_zero(z_arr) - self.log_survival_from_zero(x_arr)
            out = np.maximum(out, 0.0)
            out = np.where(z_arr == x_arr, 0.0, out)
        return _scalar_or_array(out)

    def survival(self, x, z):
        """P_x(Xbar_zeta > z) for z >= x."""
        return _scalar_or_array(np.exp(-np.asarray(self.integrated_hazard(x, z))))

    def integrated_hazard_quad(self, x: float, z: float) -> float:
        """I(x, z) by adaptive quadrature of Lambda; an independent route for checks."""
        if z < x:
            raise DomainError("survival needs z >= x")
        if isinstance(self.disc, LocalTimeAtZero):
            lo = max(x, 0.0)
            if z <= lo:
                return 0.0
            val, _ = integrate.quad(self.hazard, lo, z, epsabs=1e-12, epsrel=1e-12, limit=200)
            return val
        total = 0.0
        if x < 0.0:
            # Lambda is the constant Phi(r+q) (or Phi(r)) below zero
            total += float(self.hazard(-1.0)) * (min(z, 0.0) - x)
        lo = max(x, 0.0)
        if z > lo:
            val, _ = integrate.quad(self.hazard, lo, z, epsabs=1e-12, epsrel=1e-12, limit=200)
            total += val
        return total

    def hazard_floor(self, z_large: float) -> float:
        """Lambda at a far point, used to confirm the hazard does not vanish too fast."""
        return float(self.hazard(z_large))


def make_profile(disc: Discounting, model: LevyModel) -> HazardProfile:
    """Combine a discounting with a model; rejects unsupported pairs."""
    if isinstance(disc, LocalTimeAtZero):
        if not isinstance(model, StableSN):
            raise UnsupportedError(
                f"LocalTimeAtZero discounting requires a StableSN model, got {type(model).__name__}"
            )
        return HazardProfile(disc, model, phi_right_inverse(model, disc.r))
    if isinstance(disc, OccupationNegative):
        if isinstance(model, StableSN):
            raise UnsupportedError(
                "OccupationNegative discounting needs W^(r) with r > 0, unavailable for StableSN"
            )
        theta = phi_right_inverse(model, disc.r + disc.q)
        sf = build_scale(model, disc.r)
        return HazardProfile(disc, model, sf.phi, theta, sf)
    return HazardProfile(disc, model, phi_right_inverse(model, disc.r))


def hazard(profile: HazardProfile, z):
    return profile.hazard(z)


def survival(profile: HazardProfile, x, z):
    return profile.survival(x, z)


def local_time_passage_transform(model: StableSN, r: float, x: float, z: float) -> float:
    """E_x[exp(-r L at first passage above z)] = (1 + r W(x)) / (1 + r W(z))."""
    if not isinstance(model, StableSN):
        raise UnsupportedError("local-time passage transform is only available for StableSN")
    if not (0.0 <= x < z):
        raise DomainError("need 0 <= x < z; reduce x < 0 to x = 0 by the strong Markov property")
    sf = build_scale(model, 0.0)
    return (1.0 + r * sf.w(x)) / (1.0 + r * sf.w(z))


def discounting_to_dict(disc: Discounting) -> dict:
    if isinstance(disc, ConstantRate):
        return {"type": "constant_rate", "r": disc.r}
    if isinstance(disc, LocalTimeAtZero):
        return {"type": "local_time_at_zero", "r": disc.r}
    return {"type": "occupation_negative", "r": disc.r, "q": disc.q}
