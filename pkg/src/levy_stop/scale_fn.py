"""q-scale functions of spectrally negative Levy processes.

W^(q) is the function supported on [0, inf) whose Laplace transform is
``1 / (psi(lam) - q)`` for ``lam > Phi(q)``.  Depending on the model we use
one of four representations:

``closed_form_stable``
    ``W(x) = x**(beta-1) / Gamma(beta)`` (stable models, q = 0 only).
``two_exponential``
    Brownian motion with drift: residue expansion over the two roots of the
    quadratic ``psi(lam) - q``.
``partial_fractions``
    Exponential jumps: ``psi - q`` is rational, so W is a finite sum
    ``sum_i A_i exp(lam_i x)`` over the roots of ``(psi(lam) - q)(lam + rho)``.
``talbot``
    Fixed-Talbot numerical inversion of the Laplace transform, used when the
    roots above are (numerically) repeated.

Exponential-sum representations also give the tail integral
``int_0^inf exp(-theta y) W(z + y) dy`` in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import DivergenceError, DomainError, UnsupportedError
from .levy_model import BrownianDrift, CramerLundbergExp, LevyModel, StableSN, phi_right_inverse

CLOSED_FORM_STABLE = "closed_form_stable"
TWO_EXPONENTIAL = "two_exponential"
PARTIAL_FRACTIONS = "partial_fractions"
TALBOT = "talbot"

ROOT_SEPARATION = 1e-8
TALBOT_NODES = 64


@dataclass(frozen=True)
class ScaleFunction:
    """Immutable evaluator for W^(q).

    ``roots``/``coeffs`` are populated for the exponential-sum representations
    only.  They are stored as complex numbers; for the supported models the
    roots are real, and only real parts are ever returned.
    """

    model: LevyModel
    q: float
    representation: str
    phi: float
    roots: Tuple[complex, ...] = ()
    coeffs: Tuple[complex, ...] = ()
    talbot_nodes: int = TALBOT_NODES
    _roots_arr: np.ndarray = field(default=None, repr=False, compare=False)
    _coeffs_arr: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        roots = np.asarray(self.roots, dtype=complex)
        coeffs = np.asarray(self.coeffs, dtype=complex)
        # real arithmetic whenever possible: complex exp overflows into nan
        if roots.size and np.all(np.abs(roots.imag) <= 1e-12 * np.maximum(1.0, np.abs(roots))):
            roots = roots.real.copy()
            coeffs = coeffs.real.copy()
        object.__setattr__(self, "_roots_arr", roots)
        object.__setattr__(self, "_coeffs_arr", coeffs)

    @property
    def is_exponential_sum(self) -> bool:
        return self.representation in (TWO_EXPONENTIAL, PARTIAL_FRACTIONS)

    # -- value at zero --------------------------------------------------
    def w_at_zero(self) -> float:
        """W^(q)(0): zero for unbounded variation, 1/drift otherwise."""
        m = self.model
        if isinstance(m, StableSN) or m.sigma > 0.0:
            return 0.0
        return 1.0 / m.mu

    # -- W ---------------------------------------------------------------
    def w(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = np.where(x_arr > 0.0, self._w_positive(np.where(x_arr > 0.0, x_arr, 1.0)), 0.0)
        out = np.where(x_arr == 0.0, self.w_at_zero(), out)
        return float(out) if out.ndim == 0 else out

    def w_scaled(self, x):
        """exp(-Phi(q) x) W^(q)(x), which stays bounded as x grows."""
        x_arr = np.asarray(x, dtype=float)
        xs = np.where(x_arr > 0.0, x_arr, 1.0)
        if self.is_exponential_sum:
            shifted = self._roots_arr - self.phi
            vals = np.real(np.exp(np.multiply.outer(xs, shifted)) @ self._coeffs_arr)
        elif self.representation == CLOSED_FORM_STABLE:
            vals = self._w_positive(xs)
        else:
            vals = np.vectorize(self._talbot_scaled, otypes=[float])(xs)
        out = np.where(x_arr > 0.0, vals, 0.0)
        out = np.where(x_arr == 0.0, self.w_at_zero(), out)
        return float(out) if out.ndim == 0 else out

    def _w_positive(self, x: np.ndarray) -> np.ndarray:
        if self.is_exponential_sum:
            with np.errstate(over="ignore", invalid="ignore"):
                return np.real(np.exp(np.multiply.outer(x, self._roots_arr)) @ self._coeffs_arr)
        if self.representation == CLOSED_FORM_STABLE:
            beta = self.model.beta
            return x ** (beta - 1.0) / math.gamma(beta)
        return np.vectorize(self._talbot_w, otypes=[float])(x)

    # -- W' --------------------------------------------------------------
    def w_prime(self, x):
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr <= 0.0):
            raise DomainError("W' is only evaluated at x > 0")
        if self.is_exponential_sum:
            terms = self._coeffs_arr * self._roots_arr
            out = np.real(np.exp(np.multiply.outer(x_arr, self._roots_arr)) @ terms)
        elif self.representation == CLOSED_FORM_STABLE:
            beta = self.model.beta
            out = (beta - 1.0) * x_arr ** (beta - 2.0) / math.gamma(beta)
        else:
            out = np.vectorize(self._talbot_derivative, otypes=[float])(x_arr)
        return float(out) if np.ndim(out) == 0 else out

    # -- tail integral ---------------------------------------------------
    def tail_integral(self, theta: float, z):
        """int_0^inf exp(-theta y) W^(q)(z + y) dy."""
        self._check_theta(theta)
        z_arr = np.asarray(z, dtype=float)
        zpos = np.maximum(z_arr, 0.0)
        scaled = self._tail_scaled_nonneg(theta, zpos)
        at_pos = np.exp(self.phi * zpos) * scaled
        # For z < 0 substitute u = z + y: the integral is exp(theta z) * J(0).
        at_neg = np.exp(theta * np.minimum(z_arr, 0.0)) * self._tail_scaled_nonneg(theta, np.zeros(()))
        out = np.where(z_arr >= 0.0, at_pos, at_neg)
        return float(out) if out.ndim == 0 else out

    def log_tail_integral(self, theta: float, z):
        """log of :meth:`tail_integral`, computed without overflow for large z."""
        self._check_theta(theta)
        z_arr = np.asarray(z, dtype=float)
        zpos = np.maximum(z_arr, 0.0)
        log_pos = self.phi * zpos + np.log(self._tail_scaled_nonneg(theta, zpos))
        log_zero = math.log(float(self._tail_scaled_nonneg(theta, np.zeros(()))))
        out = np.where(z_arr >= 0.0, log_pos, theta * np.minimum(z_arr, 0.0) + log_zero)
        return float(out) if out.ndim == 0 else out

    def _check_theta(self, theta: float) -> None:
        if not theta > self.phi:
            raise DivergenceError(
                f"tail integral needs theta > Phi(q) = {self.phi:.6g}, got {theta:.6g}"
            )

    def _tail_scaled_nonneg(self, theta: float, z: np.ndarray) -> np.ndarray:
        """exp(-Phi z) * int_0^inf exp(-theta y) W(z + y) dy for z >= 0."""
        if self.is_exponential_sum:
            weights = self._coeffs_arr / (theta - self._roots_arr)
            shifted = self._roots_arr - self.phi
            return np.real(np.exp(np.multiply.outer(z, shifted)) @ weights)
        if self.representation == CLOSED_FORM_STABLE:
            beta = self.model.beta
            # substitute u = z + y: exp(theta z) int_z^inf exp(-theta u) u^(beta-1) du / Gamma(beta)
            return np.exp(theta * z) * theta ** (-beta) * special.gammaincc(beta, theta * z)
        return np.vectorize(lambda zz: self._talbot_tail_scaled(theta, zz), otypes=[float])(z)

    # -- Talbot machinery ------------------------------------------------
    def _shift(self) -> float:
        return self.phi + 1.0

    def _talbot_g(self, x: float) -> float:
        """exp(-a x) W(x) with a = Phi(q) + 1, inverted from F(s + a)."""
        a = self._shift()
        psi = self.model.psi
        q = self.q

        def transform(s):
            return 1.0 / (psi(s + a) - q)

        with mpmath.workdps(self.talbot_nodes):
            val = mpmath.invertlaplace(transform, x, method="talbot", degree=self.talbot_nodes)
        return float(val)

    def _talbot_w(self, x: float) -> float:
        return math.exp(self._shift() * x) * self._talbot_g(x)

    def _talbot_scaled(self, x: float) -> float:
        return math.exp(x) * self._talbot_g(x)

    def _talbot_derivative(self, x: float) -> float:
        h = 1e-6 * max(1.0, abs(x))
        lo = max(x - h, 0.5 * x)
        hi = x + (x - lo)
        return (self._talbot_w(hi) - self._talbot_w(lo)) / (hi - lo)

    def _talbot_tail_scaled(self, theta: float, z: float) -> float:
        # Beyond Y the integrand is replaced by its exponential asymptote
        # W(x) ~ exp(Phi x) / psi'(Phi); Y is chosen so that tail is < 1e-10.
        phi = self.phi
        slope = self.model.psi_prime(phi) if phi > 0.0 else None
        gap = theta - phi
        y_cut = max(10.0, math.log(1e10 / gap) / gap)

        def integrand(y: float) -> float:
            return math.exp(-theta * y - phi * z) * self._talbot_w(z + y)

        body, _ = integrate.quad(integrand, 0.0, y_cut, epsabs=1e-12, epsrel=1e-10, limit=200)
        tail = 0.0
        if slope is not None and slope > 0.0:
            tail = math.exp(-gap * y_cut) / (gap * slope)
        return body + tail


def _distinct(roots: np.ndarray) -> bool:
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            scale = max(1.0, abs(roots[i]), abs(roots[j]))
            if abs(roots[i] - roots[j]) < ROOT_SEPARATION * scale:
                return False
    return True


def _residue_expansion(poly: np.ndarray, numer: np.ndarray):
    """Roots of ``poly`` and residues of numer/poly at each root."""
    roots = np.roots(poly).astype(complex)
    if not _distinct(roots):
        return None
    dpoly = np.polyder(poly)
    coeffs = np.polyval(numer, roots) / np.polyval(dpoly, roots)
    order = np.argsort(roots.real)
    return roots[order], coeffs[order]


def build_scale(model: LevyModel, q: float, force_talbot: bool = False) -> ScaleFunction:
    """Build a W^(q) evaluator using the best available representation.

    ``force_talbot`` skips the closed forms; it exists so that the two routes
    can be compared against each other.
    """
    if q < 0.0 or not math.isfinite(q):
        raise DomainError("q must be a finite number >= 0")
    if isinstance(model, StableSN):
        if q > 0.0:
            raise UnsupportedError("stable scale functions are only available for q = 0")
        phi = 0.0
        if force_talbot:
            return ScaleFunction(model, q, TALBOT, phi)
        return ScaleFunction(model, q, CLOSED_FORM_STABLE, phi)

    phi = phi_right_inverse(model, q)
    expansion = None
    if not force_talbot:
        if isinstance(model, BrownianDrift):
            poly = np.array([0.5 * model.sigma**2, model.mu, -q])
            expansion = _residue_expansion(poly, np.array([1.0]))
            kind = TWO_EXPONENTIAL
        elif isinstance(model, CramerLundbergExp):
            rho = model.jump_decay
            s2 = 0.5 * model.sigma**2
            # (psi(lam) - q)(lam + rho) expanded into a cubic (or quadratic if sigma = 0)
            poly = np.array(
                [
                    s2,
                    model.mu + s2 * rho,
                    model.mu * rho - model.jump_rate - q,
                    -q * rho,
                ]
            )
            if s2 == 0.0:
                poly = poly[1:]
            expansion = _residue_expansion(poly, np.array([1.0, rho]))
            kind = PARTIAL_FRACTIONS
    if expansion is None:
        return ScaleFunction(model, q, TALBOT, phi)
    roots, coeffs = expansion
    # snap the dominant root onto the bisection value of Phi(q)
    k = int(np.argmin(np.abs(roots - phi)))
    roots[k] = complex(phi, 0.0)
    return ScaleFunction(model, q, kind, phi, tuple(roots), tuple(coeffs))


def scale_w(sf: ScaleFunction, x):
    """W^(q)(x), zero for x < 0."""
    return sf.w(x)


def scale_w_prime(sf: ScaleFunction, x):
    """Derivative of W^(q) at x > 0."""
    return sf.w_prime(x)


def exp_weighted_tail_integral(sf: ScaleFunction, theta: float, z):
    """int_0^inf exp(-theta y) W^(q)(z + y) dy for theta > Phi(q)."""
    return sf.tail_integral(theta, z)
