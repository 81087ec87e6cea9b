"""Problem configuration files (YAML) and their validation.

A configuration is a nested mapping; see ``configs/`` for one example per
figure.  Validation reports the first offending field by its dotted path,
e.g. ``discounting.type: local_time_at_zero requires model.type stable_sn``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .discounting import ConstantRate, Discounting, LocalTimeAtZero, OccupationNegative, discounting_to_dict
from .errors import ConfigError, LevyStopError
from .levy_model import BrownianDrift, CramerLundbergExp, LevyModel, StableSN, model_to_dict
from .rewards import (
    CallLinear,
    ConstantCost,
    ConvexCombo,
    CostFunction,
    ExpAffine,
    IdentityPositive,
    PowerPositivePart,
    PutLike,
    Reward,
    cost_to_dict,
    reward_to_dict,
)

MODES = ("single", "refraction", "running_cost")


def _num(d: dict, key: str, where: str, default=None, required=True) -> float:
    if key not in d:
        if required and default is None:
            raise ConfigError(f"{where}.{key}", "missing required field")
        return default
    val = d[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key}", f"expected a number, got {val!r}")
    val = float(val)
    if not math.isfinite(val):
        raise ConfigError(f"{where}.{key}", "must be finite")
    return val


def _check_keys(d: Any, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(where, f"expected a mapping, got {type(d).__name__}")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}.{sorted(extra)[0]}", "unknown field")


def _wrap(where: str, build):
    try:
        return build()
    except ConfigError:
        raise
    except LevyStopError as exc:
        raise ConfigError(where, str(exc)) from exc


def parse_model(d: dict) -> LevyModel:
    where = "model"
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{where}.type", "missing required field")
    kind = d["type"]
    if kind == "brownian_drift":
        _check_keys(d, {"type", "mu", "sigma"}, where)
        return _wrap(where, lambda: BrownianDrift(_num(d, "mu", where), _num(d, "sigma", where)))
    if kind == "cramer_lundberg_exp":
        _check_keys(d, {"type", "mu", "sigma", "jump_rate", "jump_decay"}, where)
        return _wrap(
            where,
            lambda: CramerLundbergExp(
                _num(d, "mu", where),
                _num(d, "sigma", where),
                _num(d, "jump_rate", where),
                _num(d, "jump_decay", where),
            ),
        )
    if kind == "stable_sn":
        _check_keys(d, {"type", "beta"}, where)
        return _wrap(where, lambda: StableSN(_num(d, "beta", where)))
    raise ConfigError(f"{where}.type", f"unknown model type {kind!r}")


def parse_discounting(d: dict) -> Discounting:
    where = "discounting"
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{where}.type", "missing required field")
    kind = d["type"]
    if kind == "constant_rate":
        _check_keys(d, {"type", "r"}, where)
        return _wrap(where, lambda: ConstantRate(_num(d, "r", where)))
    if kind == "local_time_at_zero":
        _check_keys(d, {"type", "r"}, where)
        return _wrap(where, lambda: LocalTimeAtZero(_num(d, "r", where)))
    if kind == "occupation_negative":
        _check_keys(d, {"type", "r", "q"}, where)
        return _wrap(where, lambda: OccupationNegative(_num(d, "r", where), _num(d, "q", where)))
    raise ConfigError(f"{where}.type", f"unknown discounting type {kind!r}")


def parse_reward(d: dict, where: str = "reward") -> Reward:
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{where}.type", "missing required field")
    kind = d["type"]
    if kind == "power_positive_part":
        _check_keys(d, {"type", "alpha"}, where)
        return _wrap(where, lambda: PowerPositivePart(_num(d, "alpha", where)))
    if kind == "identity_positive":
        _check_keys(d, {"type"}, where)
        return IdentityPositive()
    if kind == "call_linear":
        _check_keys(d, {"type", "K1"}, where)
        return _wrap(where, lambda: CallLinear(_num(d, "K1", where)))
    if kind == "put_like":
        _check_keys(d, {"type", "K2"}, where)
        return _wrap(where, lambda: PutLike(_num(d, "K2", where)))
    if kind == "convex_combo":
        _check_keys(d, {"type", "weights", "components"}, where)
        weights = d.get("weights")
        comps = d.get("components")
        if not isinstance(weights, list) or not isinstance(comps, list):
            raise ConfigError(f"{where}.weights", "weights and components must be lists")
        parsed = [parse_reward(c, f"{where}.components[{i}]") for i, c in enumerate(comps)]
        for i, w in enumerate(weights):
            if isinstance(w, bool) or not isinstance(w, (int, float)):
                raise ConfigError(f"{where}.weights[{i}]", f"expected a number, got {w!r}")
        return _wrap(where, lambda: ConvexCombo(tuple(weights), tuple(parsed)))
    raise ConfigError(f"{where}.type", f"unknown reward type {kind!r}")


def parse_cost(d: dict) -> CostFunction:
    where = "cost"
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{where}.type", "missing required field")
    kind = d["type"]
    if kind == "constant":
        _check_keys(d, {"type", "c"}, where)
        return ConstantCost(_num(d, "c", where))
    if kind == "exp_affine":
        _check_keys(d, {"type", "L", "terms"}, where)
        terms = d.get("terms", [])
        if not isinstance(terms, list) or any(not isinstance(t, list) or len(t) != 2 for t in terms):
            raise ConfigError(f"{where}.terms", "expected a list of [c, alpha] pairs")
        return _wrap(where, lambda: ExpAffine(_num(d, "L", where), tuple(tuple(t) for t in terms)))
    raise ConfigError(f"{where}.type", f"unknown cost type {kind!r}")


@dataclass
class CurveSpec:
    lower: float = -1.0
    upper: float = 3.0
    points: int = 201


@dataclass
class GridSpec:
    nodes: int = 4001
    half_width: float = 8.0


@dataclass
class MonteCarloSpec:
    dt: float = 1e-3
    horizon: Optional[float] = None
    n_paths: int = 200_000
    seed: int = 12345
    epsilon_local_time: float = 0.02
    antithetic: bool = False
    survival_levels: List[float] = field(default_factory=list)
    martingale_times: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])


@dataclass
class ProblemConfig:
    mode: str
    model: LevyModel
    discounting: Discounting
    reward: Reward
    cost: Optional[CostFunction] = None
    n: int = 1
    delta: Optional[float] = None
    x0: float = 0.0
    curve: CurveSpec = field(default_factory=CurveSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    montecarlo: MonteCarloSpec = field(default_factory=MonteCarloSpec)
    output: Optional[str] = None

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "mode": self.mode,
            "model": model_to_dict(self.model),
            "discounting": discounting_to_dict(self.discounting),
            "reward": reward_to_dict(self.reward),
            "n": self.n,
            "x0": self.x0,
            "curve": {"lower": self.curve.lower, "upper": self.curve.upper, "points": self.curve.points},
            "grid": {"nodes": self.grid.nodes, "half_width": self.grid.half_width},
            "montecarlo": {
                "dt": self.montecarlo.dt,
                "horizon": self.montecarlo.horizon,
                "n_paths": self.montecarlo.n_paths,
                "seed": self.montecarlo.seed,
                "epsilon_local_time": self.montecarlo.epsilon_local_time,
                "antithetic": self.montecarlo.antithetic,
                "survival_levels": list(self.montecarlo.survival_levels),
                "martingale_times": list(self.montecarlo.martingale_times),
            },
        }
        if self.cost is not None:
            out["cost"] = cost_to_dict(self.cost)
        if self.delta is not None:
            out["delta"] = self.delta
        if self.output is not None:
            out["output"] = self.output
        return out

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ProblemConfig":
        _check_keys(
            d,
            {"mode", "model", "discounting", "reward", "cost", "n", "delta", "x0", "curve", "grid", "montecarlo", "output"},
            "config",
        )
        mode = d.get("mode", "single")
        if mode not in MODES:
            raise ConfigError("mode", f"expected one of {', '.join(MODES)}, got {mode!r}")
        model = parse_model(d.get("model"))
        disc = parse_discounting(d.get("discounting"))
        reward = parse_reward(d.get("reward"))
        cost = parse_cost(d["cost"]) if d.get("cost") is not None else None

        n = d.get("n", 1)
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ConfigError("n", f"expected an integer >= 1, got {n!r}")
        delta = _num(d, "delta", "config", required=False) if "delta" in d else None
        x0 = _num(d, "x0", "config", default=0.0, required=False)

        curve_d = d.get("curve", {}) or {}
        _check_keys(curve_d, {"lower", "upper", "points"}, "curve")
        curve = CurveSpec(
            _num(curve_d, "lower", "curve", default=-1.0, required=False),
            _num(curve_d, "upper", "curve", default=3.0, required=False),
            int(curve_d.get("points", 201)),
        )
        if curve.upper <= curve.lower or curve.points < 2:
            raise ConfigError("curve", "need upper > lower and points >= 2")

        grid_d = d.get("grid", {}) or {}
        _check_keys(grid_d, {"nodes", "half_width"}, "grid")
        grid = GridSpec(int(grid_d.get("nodes", 4001)), _num(grid_d, "half_width", "grid", default=8.0, required=False))
        if grid.nodes < 64 or grid.half_width <= 0.0:
            raise ConfigError("grid", "need nodes >= 64 and half_width > 0")

        mc_d = d.get("montecarlo", {}) or {}
        _check_keys(
            mc_d,
            {"dt", "horizon", "n_paths", "seed", "epsilon_local_time", "antithetic", "survival_levels", "martingale_times"},
            "montecarlo",
        )
        horizon = mc_d.get("horizon")
        if horizon is not None:
            horizon = _num(mc_d, "horizon", "montecarlo")
        mc = MonteCarloSpec(
            _num(mc_d, "dt", "montecarlo", default=1e-3, required=False),
            horizon,
            int(mc_d.get("n_paths", 200_000)),
            int(mc_d.get("seed", 12345)),
            _num(mc_d, "epsilon_local_time", "montecarlo", default=0.02, required=False),
            bool(mc_d.get("antithetic", False)),
            [float(v) for v in mc_d.get("survival_levels", [])],
            [float(v) for v in mc_d.get("martingale_times", [0.5, 1.0, 2.0])],
        )
        if mc.dt <= 0.0 or mc.n_paths < 1 or mc.epsilon_local_time <= 0.0:
            raise ConfigError("montecarlo", "need dt > 0, n_paths >= 1 and epsilon_local_time > 0")
        if not (0 <= mc.seed < 2**64):
            raise ConfigError("montecarlo.seed", "must be an unsigned 64-bit integer")

        output = d.get("output")
        cfg = cls(mode, model, disc, reward, cost, n, delta, x0, curve, grid, mc, output)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Cross-field rules mirroring the solver preconditions."""
        model_type = model_to_dict(self.model)["type"]
        if isinstance(self.discounting, LocalTimeAtZero) and not isinstance(self.model, StableSN):
            raise ConfigError(
                "discounting.type",
                f"local_time_at_zero requires model.type stable_sn, got {model_type}",
            )
        if isinstance(self.discounting, OccupationNegative) and isinstance(self.model, StableSN):
            raise ConfigError("discounting.type", "occupation_negative is not available with model.type stable_sn")
        if self.mode == "single":
            if self.n != 1:
                raise ConfigError("n", "mode single takes n = 1")
            if self.cost is not None:
                raise ConfigError("cost", "running costs need mode running_cost")
        if self.mode == "refraction":
            if self.delta is None or not self.delta > 0.0:
                raise ConfigError("delta", "mode refraction needs delta > 0")
            if not isinstance(self.discounting, ConstantRate):
                raise ConfigError("discounting.type", "mode refraction needs constant_rate discounting")
            if isinstance(self.model, StableSN):
                raise ConfigError("model.type", "mode refraction needs brownian_drift or cramer_lundberg_exp")
            if self.cost is not None:
                raise ConfigError("cost", "refraction combined with running costs is not defined")
        elif self.delta is not None:
            raise ConfigError("delta", "delta only applies to mode refraction")
        if self.mode == "running_cost":
            if self.cost is None:
                raise ConfigError("cost", "mode running_cost needs a cost")
            zero = isinstance(self.cost, ConstantCost) and self.cost.c == 0.0
            if not zero and not isinstance(self.discounting, ConstantRate):
                raise ConfigError("discounting.type", "running costs need constant_rate discounting")

    def path_horizon(self) -> float:
        return self.montecarlo.horizon if self.montecarlo.horizon is not None else 30.0 / self.discounting.r


def load_config(path) -> ProblemConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return ProblemConfig.from_dict(data)


def dump_config(cfg: ProblemConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def set_dotted(d: dict, dotted: str, value) -> dict:
    """Copy of d with the scalar at ``a.b.c`` replaced."""
    out = copy.deepcopy(d)
    node = out
    parts = dotted.split(".")
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(dotted, "no such field in the configuration")
        node = node[p]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(dotted, "no such field in the configuration")
    if isinstance(node[parts[-1]], (dict, list)):
        raise ConfigError(dotted, "only scalar fields can be swept")
    node[parts[-1]] = value
    return out
