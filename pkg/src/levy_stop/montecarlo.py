"""Monte Carlo verification of survival laws, strategy values and martingales.

Discounting is simulated through its killing representation: a path is
stopped at ``zeta``, the first time the additive functional ``A`` exceeds an
independent unit exponential.  Then ``E_x[exp(-A_{T_z}) 1{T_z < inf}]`` is
just ``P_x(Xbar_zeta > z)``, and a single simulated ``Xbar_zeta`` per path
serves every level ``z`` at once.

Paths are reproducible one by one: the draws of path ``i`` depend only on
``(seed, i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, List, Optional, Sequence

import numpy as np

from . import _kernels as K
from .discounting import ConstantRate, Discounting, HazardProfile, LocalTimeAtZero, OccupationNegative
from .errors import ModelError, UnsupportedError
from .levy_model import BrownianDrift, CramerLundbergExp, LevyModel, StableSN, phi_right_inverse
from .rewards import ConstantCost, CostFunction, Reward

SE_BAND = 3.0


@dataclass(frozen=True)
class PathConfig:
    dt: float = 1e-3
    horizon: float = 100.0
    n_paths: int = 100_000
    seed: int = 12345
    epsilon_local_time: float = 0.02
    antithetic: bool = False

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ModelError("dt must be positive")
        if not self.horizon > 0.0:
            raise ModelError("horizon must be positive")
        if self.dt > self.horizon:
            raise ModelError("dt must not exceed the horizon")
        if int(self.n_paths) < 1:
            raise ModelError("n_paths must be >= 1")
        if not self.epsilon_local_time > 0.0:
            raise ModelError("epsilon_local_time must be positive")
        if not (0 <= int(self.seed) < 2**64):
            raise ModelError("seed must be an unsigned 64-bit integer")


def default_horizon(disc: Discounting) -> float:
    return 30.0 / disc.r


@dataclass
class Estimate:
    estimate: float
    stderr: Optional[float]
    n_paths: int
    target: Optional[float] = None
    truncation_bound: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> Optional[bool]:
        """3-SE agreement with the target; None when it cannot be judged."""
        if self.target is None or self.stderr is None:
            return None
        if self.stderr == 0.0:
            return abs(self.estimate - self.target) <= 1e-12 * max(1.0, abs(self.target))
        return abs(self.estimate - self.target) < SE_BAND * self.stderr


def _summarise(samples: np.ndarray, target=None, truncation=0.0, antithetic=False) -> Estimate:
    n = samples.size
    if antithetic and n >= 4 and n % 2 == 0:
        pairs = 0.5 * (samples[0::2] + samples[1::2])
        mean = float(np.mean(pairs))
        se = float(np.std(pairs, ddof=1) / math.sqrt(pairs.size))
        return Estimate(mean, se, n, target, truncation)
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else None
    return Estimate(mean, se, n, target, truncation)


def _model_args(model: LevyModel):
    if isinstance(model, StableSN):
        return (K.MODEL_STABLE, 0.0, 0.0, 0.0, 1.0, float(model.beta))
    if isinstance(model, BrownianDrift):
        return (K.MODEL_JUMP_DIFFUSION, float(model.mu), float(model.sigma), 0.0, 1.0, 2.0)
    return (
        K.MODEL_JUMP_DIFFUSION,
        float(model.mu),
        float(model.sigma),
        float(model.jump_rate),
        float(model.jump_decay),
        2.0,
    )


def _check_antithetic(model: LevyModel, cfg: PathConfig) -> None:
    if cfg.antithetic and isinstance(model, StableSN):
        raise UnsupportedError("antithetic pairs need a symmetric driving noise; skewed stable noise is not")


def _disc_args(disc: Discounting, model: LevyModel):
    if isinstance(disc, ConstantRate):
        return (K.DISC_CONSTANT, float(disc.r), 0.0)
    if isinstance(disc, OccupationNegative):
        return (K.DISC_OCCUPATION, float(disc.r), float(disc.q))
    if not isinstance(model, StableSN):
        raise UnsupportedError("local-time discounting is only simulated for StableSN models")
    return (K.DISC_LOCAL_TIME, float(disc.r), 0.0)


def killed_maxima(
    model: LevyModel, disc: Discounting, cfg: PathConfig, x: float, chunks: int = 1, stop_level: float = math.inf
):
    """Per-path ``Xbar_zeta`` (capped once above ``stop_level``) and truncation flags.

    ``chunks`` splits the work into consecutive path ranges; the result is
    bit-identical for any value.
    """
    _check_antithetic(model, cfg)
    margs = _model_args(model)
    dcode, r, q = _disc_args(disc, model)
    n = int(cfg.n_paths)
    bounds = np.linspace(0, n, max(1, int(chunks)) + 1).astype(np.int64)
    parts, flags = [], []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        xb, tr = K.killed_maximum(
            *margs,
            dcode,
            r,
            q,
            float(cfg.epsilon_local_time),
            float(x),
            float(cfg.dt),
            float(cfg.horizon),
            np.uint64(cfg.seed),
            int(lo),
            int(hi - lo),
            bool(cfg.antithetic),
            float(stop_level),
        )
        parts.append(xb)
        flags.append(tr)
    return np.concatenate(parts), np.concatenate(flags)


def _truncation_bound(disc: Discounting, cfg: PathConfig) -> float:
    if isinstance(disc, LocalTimeAtZero):
        return math.nan  # local time has no deterministic growth rate
    return math.exp(-disc.r * cfg.horizon)


def mc_survival_many(
    model: LevyModel,
    disc: Discounting,
    cfg: PathConfig,
    x: float,
    zs: Sequence[float],
    targets: Optional[Sequence[float]] = None,
) -> List[Estimate]:
    """P_x(Xbar_zeta > z) for several z from one batch of paths."""
    xbar, truncated = killed_maxima(model, disc, cfg, x, stop_level=max(zs, default=x))
    out = []
    bound = _truncation_bound(disc, cfg)
    for i, z in enumerate(zs):
        target = None if targets is None else targets[i]
        if z < x:
            raise ModelError("survival needs z >= x")
        if z == x:
            out.append(Estimate(1.0, 0.0, int(cfg.n_paths), target, 0.0))
            continue
        est = _summarise((xbar > z).astype(float), target, bound, cfg.antithetic)
        est.extra["truncated_fraction"] = float(np.mean(truncated))
        out.append(est)
    return out


def mc_survival(model, disc, cfg: PathConfig, x: float, z: float, target: Optional[float] = None) -> Estimate:
    """E_x[exp(-A_{T_z}) 1{T_z < horizon}]."""
    return mc_survival_many(model, disc, cfg, x, [z], None if target is None else [target])[0]


def mc_strategy_value_many(
    model, disc, f: Reward, cfg: PathConfig, x: float, zs: Sequence[float], targets=None
) -> List[Estimate]:
    """Discounted reward of the up-crossing rule at each threshold z.

    Spectrally negative paths creep upward, so the state at the passage time
    is z itself and the payoff is f(z) on every path whose maximum before
    killing exceeds z.
    """
    xbar, truncated = killed_maxima(model, disc, cfg, x, stop_level=max(zs, default=x))
    out = []
    bound = _truncation_bound(disc, cfg)
    for i, z in enumerate(zs):
        target = None if targets is None else targets[i]
        if z < x:
            raise ModelError("strategy value needs z >= x")
        if z == x:
            out.append(Estimate(float(f.f(x)), 0.0, int(cfg.n_paths), target, 0.0))
            continue
        fz = float(f.f(z))
        est = _summarise(np.where(xbar > z, fz, 0.0), target, bound * abs(fz), cfg.antithetic)
        est.extra["truncated_fraction"] = float(np.mean(truncated))
        out.append(est)
    return out


def mc_strategy_value(model, disc, f: Reward, cfg: PathConfig, x: float, z: float, target=None) -> Estimate:
    return mc_strategy_value_many(model, disc, f, cfg, x, [z], None if target is None else [target])[0]


def states_and_caf(model, disc, cfg: PathConfig, x: float, t: float):
    _check_antithetic(model, cfg)
    margs = _model_args(model)
    dcode, r, q = _disc_args(disc, model)
    return K.state_and_caf(
        *margs,
        dcode,
        r,
        q,
        float(cfg.epsilon_local_time),
        float(x),
        float(cfg.dt),
        float(t),
        np.uint64(cfg.seed),
        0,
        int(cfg.n_paths),
        bool(cfg.antithetic),
    )


def mc_martingale_check(model, disc, profile: HazardProfile, cfg: PathConfig, x: float, t: float) -> Estimate:
    """E_x[exp(-A_t + I(0, X_t))] against exp(I(0, x))."""
    target = math.exp(float(profile.log_survival_from_zero(x)))
    if t == 0.0:
        return Estimate(target, 0.0, int(cfg.n_paths), target)
    if t > cfg.horizon:
        raise ModelError("t must not exceed the horizon")
    xs, acc = states_and_caf(model, disc, cfg, x, t)
    weights = np.exp(-acc + np.asarray(profile.log_survival_from_zero(xs), dtype=float))
    return _summarise(weights, target, 0.0, cfg.antithetic)


# ---------------------------------------------------------------------------
# full paths
# ---------------------------------------------------------------------------


@dataclass
class PathSample:
    """One simulated trajectory; jump epochs appear as two nodes with equal time."""

    times: np.ndarray
    states: np.ndarray
    running_max: np.ndarray
    caf: Optional[np.ndarray] = None


def simulate_paths(model: LevyModel, cfg: PathConfig, x0: float = 0.0) -> Iterator[PathSample]:
    margs = _model_args(model)
    for p in range(int(cfg.n_paths)):
        times, states = K.single_path(
            *margs, float(cfg.dt), float(cfg.horizon), float(x0), np.uint64(cfg.seed), int(p)
        )
        yield PathSample(times, states, np.maximum.accumulate(states))


def accumulate_caf(path: PathSample, disc: Discounting, model: Optional[LevyModel] = None, eps: float = 0.02) -> PathSample:
    """Fill in A on the path nodes with a left-point rule."""
    if isinstance(disc, LocalTimeAtZero) and model is not None and not isinstance(model, StableSN):
        raise UnsupportedError("local-time discounting is only simulated for StableSN models")
    dt = np.diff(path.times)
    left = path.states[:-1]
    if isinstance(disc, ConstantRate):
        rate = np.full_like(left, disc.r)
    elif isinstance(disc, OccupationNegative):
        rate = disc.r + disc.q * (left < 0.0)
    else:
        rate = disc.r / (2.0 * eps) * (np.abs(left) < eps)
    caf = np.concatenate([[0.0], np.cumsum(rate * dt)])
    if isinstance(disc, ConstantRate):
        caf = disc.r * (path.times - path.times[0])
    return replace(path, caf=caf)


# ---------------------------------------------------------------------------
# exact samplers used by the oracles
# ---------------------------------------------------------------------------


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) % 2**64, int(stream)]))


def sample_increment(model: LevyModel, t, rng: np.random.Generator, size: int) -> np.ndarray:
    """Exact draws of X_t (t scalar or array) for jump-diffusion models."""
    if isinstance(model, StableSN):
        raise UnsupportedError("exact increments are provided for jump-diffusion models only")
    t = np.broadcast_to(np.asarray(t, dtype=float), (size,))
    out = model.mu * t + model.sigma * np.sqrt(t) * rng.standard_normal(size)
    if isinstance(model, CramerLundbergExp) and model.jump_rate > 0.0:
        counts = rng.poisson(model.jump_rate * t)
        jumps = np.zeros(size)
        pos = counts > 0
        jumps[pos] = rng.gamma(counts[pos], 1.0 / model.jump_decay)
        out -= jumps
    return out


def mc_perpetuity(cost: CostFunction, model: LevyModel, r: float, x: float, n: int, seed: int) -> Estimate:
    """Cbar(x) = E_x[int e^{-rt} C(X_t) dt] = E[C(x + X_{e_r})] / r."""
    if isinstance(cost, ConstantCost):
        return Estimate(cost.c / r, 0.0, n)
    rng = _rng(seed, 1)
    t = rng.exponential(1.0 / r, n)
    xs = x + sample_increment(model, t, rng, n)
    return _summarise(np.asarray(cost(xs), dtype=float) / r)


def mc_expectation_above(g, model: LevyModel, delta: float, x: float, c: float, n: int, seed: int) -> Estimate:
    """E[g(x + X_delta) 1{x + X_delta > c}] from exact increments."""
    rng = _rng(seed, 2)
    y = x + sample_increment(model, delta, rng, n)
    vals = np.where(y > c, np.asarray(g(y), dtype=float), 0.0)
    return _summarise(vals)


def _passage_times(d: np.ndarray, mu: float, sigma: float, z: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """First passage of mu t + sigma B_t above d >= 0 from common random numbers.

    Inverse-Gaussian by Michael-Schucany-Haas when the passage is certain;
    with negative drift the passage happens with probability exp(2 mu d / sigma^2).
    """
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    pos = d > 0.0
    if not np.any(pos):
        return out
    dd = d[pos]
    zz, uu, vv = z[pos], u[pos], v[pos]
    if mu == 0.0:
        out[pos] = (dd / sigma) ** 2 / (zz * zz)
        return out
    m = dd / abs(mu)
    lam = (dd / sigma) ** 2
    y = zz * zz
    x = m + m * m * y / (2.0 * lam) - m / (2.0 * lam) * np.sqrt(4.0 * m * lam * y + (m * y) ** 2)
    t = np.where(uu <= m / (m + x), x, m * m / x)
    if mu < 0.0:
        t = np.where(vv <= np.exp(2.0 * mu * dd / sigma**2), t, np.inf)
    out[pos] = t
    return out


class TwoStopOracle:
    """Monte Carlo value of "exercise above a, wait delta, exercise above b".

    Brownian motion with drift only.  All threshold pairs share the same
    random numbers, so differences between pairs have small error bars.
    """

    def __init__(self, model: BrownianDrift, r: float, delta: float, f: Reward, x0: float, n: int, seed: int):
        if not isinstance(model, BrownianDrift):
            raise UnsupportedError("the two-stop oracle simulates BrownianDrift only")
        self.model, self.r, self.delta, self.f, self.x0 = model, r, delta, f, x0
        rng = _rng(seed, 3)
        self.z1, self.z2, self.z3 = rng.standard_normal((3, n))
        self.u1, self.u3, self.v1, self.v3 = rng.random((4, n))

    def samples(self, a: float, b: float) -> np.ndarray:
        m = self.model
        t1 = _passage_times(np.full_like(self.z1, max(a - self.x0, 0.0)), m.mu, m.sigma, self.z1, self.u1, self.v1)
        x1 = max(self.x0, a)
        y = x1 + m.mu * self.delta + m.sigma * math.sqrt(self.delta) * self.z2
        t2 = _passage_times(np.maximum(b - y, 0.0), m.mu, m.sigma, self.z3, self.u3, self.v3)
        second = np.asarray(self.f.f(np.maximum(y, b)), dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            stage2 = math.exp(-self.r * self.delta) * np.exp(-self.r * t2) * second
            val = np.exp(-self.r * t1) * (float(self.f.f(x1)) + stage2)
        return np.where(np.isfinite(t1), val, 0.0)

    def value(self, a: float, b: float) -> Estimate:
        return _summarise(self.samples(a, b))

    def difference(self, a: float, b: float, a_ref: float, b_ref: float) -> Estimate:
        """value(a_ref, b_ref) - value(a, b) with its paired standard error."""
        return _summarise(self.samples(a_ref, b_ref) - self.samples(a, b))
