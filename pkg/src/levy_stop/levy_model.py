"""Parametric spectrally negative Levy models.

Three families are supported:

* :class:`BrownianDrift` -- ``X_t = mu t + sigma B_t``;
* :class:`CramerLundbergExp` -- Brownian motion with drift minus a compound
  Poisson process with exponentially distributed jump sizes;
* :class:`StableSN` -- the spectrally negative beta-stable process normalised
  so that ``psi(lam) = lam**beta``.

Every model exposes its Laplace exponent ``psi(lam) = log E[exp(lam X_1)]``
and the right inverse ``Phi(q) = sup{lam >= 0 : psi(lam) = q}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ModelError

PHI_TOL = 1e-12


@dataclass(frozen=True)
class BrownianDrift:
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ModelError("BrownianDrift parameters must be finite")
        if self.sigma <= 0.0:
            raise ModelError("BrownianDrift needs sigma > 0 (pure drift is degenerate)")

    @property
    def has_diffusion(self) -> bool:
        return True

    def psi(self, lam):
        return self.mu * lam + 0.5 * self.sigma**2 * lam * lam

    def psi_prime(self, lam):
        return self.mu + self.sigma**2 * lam

    def psi_prime_zero(self) -> float:
        return self.mu


@dataclass(frozen=True)
class CramerLundbergExp:
    mu: float
    sigma: float
    jump_rate: float
    jump_decay: float

    def __post_init__(self) -> None:
        vals = (self.mu, self.sigma, self.jump_rate, self.jump_decay)
        if not all(math.isfinite(v) for v in vals):
            raise ModelError("CramerLundbergExp parameters must be finite")
        if self.sigma < 0.0:
            raise ModelError("sigma must be >= 0")
        if self.jump_rate < 0.0:
            raise ModelError("jump_rate must be >= 0")
        if self.jump_decay <= 0.0:
            raise ModelError("jump_decay must be > 0")
        if self.sigma == 0.0 and self.jump_rate == 0.0:
            raise ModelError("sigma > 0 or jump_rate > 0 required (pure drift is degenerate)")
        if self.sigma == 0.0 and self.mu <= 0.0:
            # bounded variation with no upward drift would have no upward motion at all
            raise ModelError("with sigma = 0 the drift mu must be positive")

    @property
    def has_diffusion(self) -> bool:
        return self.sigma > 0.0

    def psi(self, lam):
        return (
            self.mu * lam
            + 0.5 * self.sigma**2 * lam * lam
            - self.jump_rate * lam / (lam + self.jump_decay)
        )

    def psi_prime(self, lam):
        return (
            self.mu
            + self.sigma**2 * lam
            - self.jump_rate * self.jump_decay / (lam + self.jump_decay) ** 2
        )

    def psi_prime_zero(self) -> float:
        return self.mu - self.jump_rate / self.jump_decay


@dataclass(frozen=True)
class StableSN:
    beta: float

    def __post_init__(self) -> None:
        if not (1.0 < self.beta <= 2.0):
            raise ModelError("StableSN needs beta in (1, 2]")

    @property
    def has_diffusion(self) -> bool:
        return self.beta == 2.0

    def psi(self, lam):
        return lam**self.beta

    def psi_prime(self, lam):
        return self.beta * lam ** (self.beta - 1.0)

    def psi_prime_zero(self) -> float:
        return 0.0


LevyModel = Union[BrownianDrift, CramerLundbergExp, StableSN]


def laplace_exponent(model: LevyModel, lam):
    """psi(lam) for ``lam >= 0``; accepts scalars or arrays."""
    arr = np.asarray(lam, dtype=float)
    if np.any(arr < 0.0) or np.any(np.isnan(arr)):
        raise DomainError("the Laplace exponent is only evaluated for lam >= 0")
    out = model.psi(arr)
    return float(out) if np.ndim(out) == 0 else out


def _argmin_psi(model: LevyModel) -> float:
    """Location of the minimum of the convex function psi on [0, inf)."""
    if model.psi_prime_zero() >= 0.0:
        return 0.0
    hi = 1.0
    while model.psi_prime(hi) < 0.0:
        hi *= 2.0
    lo = 0.0
    while hi - lo > PHI_TOL:
        mid = 0.5 * (lo + hi)
        if model.psi_prime(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def phi_right_inverse(model: LevyModel, q: float) -> float:
    """Largest nonnegative root of ``psi(lam) = q``.

    psi is convex and tends to infinity, so the root is bracketed by expanding
    an upper bound from the minimiser of psi and then bisected down to an
    absolute width of 1e-12.
    """
    if q < 0.0 or not math.isfinite(q):
        raise DomainError("Phi is defined for q >= 0")
    lo = _argmin_psi(model)
    if q == 0.0 and lo == 0.0:
        return 0.0
    hi = max(1.0, 2.0 * lo)
    while model.psi(hi) < q:
        hi *= 2.0
    while hi - lo > PHI_TOL:
        mid = 0.5 * (lo + hi)
        if model.psi(mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def model_to_dict(model: LevyModel) -> dict:
    if isinstance(model, BrownianDrift):
        return {"type": "brownian_drift", "mu": model.mu, "sigma": model.sigma}
    if isinstance(model, CramerLundbergExp):
        return {
            "type": "cramer_lundberg_exp",
            "mu": model.mu,
            "sigma": model.sigma,
            "jump_rate": model.jump_rate,
            "jump_decay": model.jump_decay,
        }
    return {"type": "stable_sn", "beta": model.beta}
