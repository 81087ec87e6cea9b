"""Command-line front end: ``levy-stop solve|verify|sweep --config FILE``.

Exit status: 0 success, 1 infeasible or unbounded problem, 2 configuration
error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np
import yaml

from .config import ProblemConfig, load_config, set_dotted
from .csvio import write_csv
from .discounting import make_profile
from .errors import (
    ConditionMViolation,
    ConfigError,
    DivergenceError,
    InconclusiveError,
    IntegrabilityError,
    LevyStopError,
    UnsupportedError,
)
from .montecarlo import PathConfig, mc_martingale_check, mc_strategy_value_many, mc_survival_many
from .recursive_stop import RefractionProblem, RunningCostProblem, solve_refraction, solve_running_cost
from .single_stop import UNBOUNDED, ThresholdSolution, is_unbounded, solve_single, strategy_value, value_curve

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 3

log = logging.getLogger("levy_stop")

VALUE_HEADER = ["x", "f", "V", "h", "region"]


class Infeasible(Exception):
    """The problem is well posed but has no finite optimal value."""


def _curve_points(cfg: ProblemConfig) -> np.ndarray:
    return np.linspace(cfg.curve.lower, cfg.curve.upper, cfg.curve.points)


def _out_dir(cfg: ProblemConfig, override: Optional[str]) -> Path:
    return Path(override or cfg.output or "out")


def _with_seed(cfg: ProblemConfig, seed: Optional[int]) -> ProblemConfig:
    if seed is None:
        return cfg
    if not (0 <= seed < 2**64):
        raise ConfigError("--seed", "must be an unsigned 64-bit integer")
    return replace(cfg, montecarlo=replace(cfg.montecarlo, seed=seed))


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------


def run_solver(cfg: ProblemConfig):
    profile = make_profile(cfg.discounting, cfg.model)
    if cfg.mode == "single":
        return solve_single(cfg.reward, profile)
    if cfg.mode == "refraction":
        problem = RefractionProblem(
            cfg.model, cfg.discounting.r, cfg.delta, cfg.n, cfg.reward, cfg.grid.nodes, cfg.grid.half_width
        )
        return solve_refraction(problem)
    problem = RunningCostProblem(profile, [cfg.reward] * cfg.n, [cfg.cost] * cfg.n)
    return solve_running_cost(problem)


def _single_outputs(sol: ThresholdSolution, cfg: ProblemConfig, out: Path, elapsed: float) -> None:
    write_csv(out / "thresholds.csv", ["level", "x_star", "case", "xbar_star"], [(1, sol.x_star, "single", sol.x_star)])
    write_csv(out / "value_curve.csv", VALUE_HEADER, value_curve(sol, _curve_points(cfg)))
    diag = [
        ("x_star", sol.x_star),
        ("c0", UNBOUNDED if sol.c0 == math.inf else sol.c0),
        ("smooth_fit_gap", sol.smooth_fit_gap),
        ("h_provenance", sol.h.provenance),
    ]
    diag += list(sol.report.to_dict().items())
    diag.append(("runtime_seconds", elapsed))
    write_csv(out / "diagnostics.csv", ["key", "value"], diag)


def _recursive_outputs(sol, cfg: ProblemConfig, out: Path, elapsed: float) -> None:
    write_csv(out / "thresholds.csv", ["level", "x_star", "case", "xbar_star"], sol.ladder_rows())
    xs = _curve_points(cfg)
    fs = np.asarray(cfg.reward.f(xs), dtype=float)
    for level in range(1, len(sol.thresholds) + 1):
        x_star = sol.thresholds[level - 1]
        vs = np.asarray(sol.value_levels[level - 1](xs), dtype=float)
        with np.errstate(all="ignore"):
            hs = np.asarray(sol.h_levels[level - 1](xs), dtype=float)
        rows = [
            (x, f, v, h, "stop" if x >= x_star else "continue") for x, f, v, h in zip(xs, fs, vs, hs)
        ]
        write_csv(out / f"value_curve_level{level}.csv", VALUE_HEADER, rows)
        if level == len(sol.thresholds):
            write_csv(out / "value_curve.csv", VALUE_HEADER, rows)
    diag = [("mode", sol.kind), ("levels", len(sol.thresholds)), ("runtime_seconds", elapsed)]
    for key, val in sol.diagnostics.items():
        if isinstance(val, (int, float)):
            diag.append((key, val))
        elif isinstance(val, list) and all(isinstance(v, (int, float)) for v in val):
            diag += [(f"{key}_{i + 1}", v) for i, v in enumerate(val)]
    write_csv(out / "diagnostics.csv", ["key", "value"], diag)


def cmd_solve(cfg: ProblemConfig, out: Path) -> int:
    start = time.perf_counter()
    try:
        sol = run_solver(cfg)
    except ConditionMViolation as exc:
        rows = [("error", str(exc))]
        if exc.report is not None:
            rows += list(exc.report.to_dict().items())
        write_csv(out / "diagnostics.csv", ["key", "value"], rows)
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (IntegrabilityError, DivergenceError) as exc:
        write_csv(out / "diagnostics.csv", ["key", "value"], [("error", str(exc))])
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    elapsed = time.perf_counter() - start
    if isinstance(sol, ThresholdSolution):
        _single_outputs(sol, cfg, out, elapsed)
        if not sol.bounded:
            print("unbounded: the optimal value is infinite (x* = inf, c0 = inf)", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"x* = {sol.x_star:.10g}")
    else:
        _recursive_outputs(sol, cfg, out, elapsed)
        print("ladder: " + ", ".join(f"x_{l}* = {x:.10g}" for l, x in enumerate(sol.thresholds, 1)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

VERIFY_HEADER = ["quantity", "x", "z_or_t", "estimate", "stderr", "analytic_target", "pass"]


def _pass_cell(est) -> str:
    p = est.passed
    return "inconclusive" if p is None else ("true" if p else "false")


def _se_cell(est):
    return "unavailable" if est.stderr is None else est.stderr


def cmd_verify(cfg: ProblemConfig, out: Path) -> int:
    """Monte Carlo checks of the single-stop problem defined by the config.

    For recursive modes the first-level problem (same model, discounting and
    reward) is verified.
    """
    profile = make_profile(cfg.discounting, cfg.model)
    try:
        sol = solve_single(cfg.reward, profile)
    except (ConditionMViolation, IntegrabilityError, DivergenceError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if not math.isfinite(sol.x_star):
        print("verification needs a finite threshold", file=sys.stderr)
        return EXIT_INFEASIBLE
    mc = cfg.montecarlo
    pcfg = PathConfig(mc.dt, cfg.path_horizon(), mc.n_paths, mc.seed, mc.epsilon_local_time, mc.antithetic)
    x0 = min(cfg.x0, sol.x_star)
    rows = []

    levels = sorted(set([sol.x_star] + [z for z in mc.survival_levels if z >= x0]))
    targets = [float(profile.survival(x0, z)) for z in levels]
    for z, est in zip(levels, mc_survival_many(cfg.model, cfg.discounting, pcfg, x0, levels, targets)):
        rows.append(("survival", x0, z, est.estimate, _se_cell(est), est.target, _pass_cell(est)))

    zs = [z for z in (sol.x_star, sol.x_star - 0.1, sol.x_star + 0.1) if z >= x0]
    targets = [float(strategy_value(cfg.reward, profile, x0, z)) for z in zs]
    ests = mc_strategy_value_many(cfg.model, cfg.discounting, cfg.reward, pcfg, x0, zs, targets)
    for z, est in zip(zs, ests):
        rows.append(("strategy_value", x0, z, est.estimate, _se_cell(est), est.target, _pass_cell(est)))
    best = ests[0]
    for z, est in zip(zs[1:], ests[1:]):
        if best.stderr is None or est.stderr is None:
            verdict, se = "inconclusive", "unavailable"
        else:
            se = math.hypot(best.stderr, est.stderr)
            verdict = "true" if est.estimate - best.estimate < 3.0 * se else "false"
        rows.append(("strategy_value_not_above_optimum", x0, z, est.estimate - best.estimate, se, 0.0, verdict))

    for t in mc.martingale_times:
        if t > pcfg.horizon:
            continue
        est = mc_martingale_check(cfg.model, cfg.discounting, profile, pcfg, x0, t)
        rows.append(("martingale", x0, t, est.estimate, _se_cell(est), est.target, _pass_cell(est)))

    write_csv(out / "verification.csv", VERIFY_HEADER, rows)
    failed = sum(1 for r in rows if r[-1] == "false")
    print(f"verification: {len(rows) - failed}/{len(rows)} rows without failure")
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def parse_range(text: str) -> np.ndarray:
    try:
        start, stop, num = text.split(":")
        num = int(num)
        if num < 0:
            raise ValueError
        return np.linspace(float(start), float(stop), num)
    except ValueError as exc:
        raise ConfigError("--range", f"expected start:stop:num, got {text!r}") from exc


def cmd_sweep(raw: dict, parameter: str, values: np.ndarray, out: Path, n_levels: int) -> int:
    header = ["parameter", "value"] + [f"x_star_{l}" for l in range(1, n_levels + 1)] + ["V_x0", "status"]
    rows = []
    if len(values):
        set_dotted(raw, parameter, float(values[0]))  # reject unknown parameters up front
    for val in values:
        try:
            cfg = ProblemConfig.from_dict(set_dotted(raw, parameter, float(val)))
            sol = run_solver(cfg)
            if isinstance(sol, ThresholdSolution):
                xs = [sol.x_star]
                v = sol.value(cfg.x0)
                status = "ok" if sol.bounded else "unbounded"
            else:
                xs = list(sol.thresholds)
                v = sol.value_levels[-1](cfg.x0)
                status = "ok"
            rows.append([parameter, val] + xs + [None] * (n_levels - len(xs)) + [v, status])
        except (LevyStopError, ValueError) as exc:
            msg = str(exc).replace("\n", " ")
            rows.append([parameter, val] + [None] * n_levels + [None, f"error: {msg}"])
    write_csv(out / "sweep.csv", header, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levy-stop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("solve", "solve the stopping problem and write thresholds, value curve and diagnostics"),
        ("verify", "check the solution against Monte Carlo simulation"),
        ("sweep", "re-solve over a range of one scalar parameter"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="YAML problem configuration")
        p.add_argument("--out", help="output directory (default: config 'output' or ./out)")
        p.add_argument("--seed", type=int, help="override the Monte Carlo seed")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "sweep":
            p.add_argument("--param", required=True, help="dotted config field, e.g. cost.c")
            p.add_argument("--range", required=True, dest="range_", help="start:stop:num")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = _with_seed(load_config(args.config), args.seed)
        out = _out_dir(cfg, args.out)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        values = parse_range(args.range_)
        raw = yaml.safe_load(Path(args.config).read_text())
        return cmd_sweep(raw, args.param, values, out, cfg.n)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnsupportedError, InconclusiveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
