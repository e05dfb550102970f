"""Command-line front end: ``fracsde {check,simulate,picard,fit,example}``.

Exit codes: 0 ok, 1 configuration error, 2 criterion failure, 3 solver
divergence.  The master seed is taken from the config's ``run.seed``, then
the ``FRACSDE_SEED`` environment variable, then ``--seed`` (later wins).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError, DivergenceError, FitDomainError
from .model import (damped_dict, example_dict, problem_from_dict)

log = logging.getLogger("fracsde")

EXIT_OK, EXIT_CONFIG, EXIT_CRITERION, EXIT_DIVERGENCE = 0, 1, 2, 3
PRESETS = {"example": example_dict, "damped": damped_dict}
RUN_DEFAULTS = {"seed": 0, "paths": 100, "dt": 0.01, "tol": 1e-10, "max_iter": 100,
                "workers": 1, "method": "picard", "format": "csv"}


@dataclass
class RunConfig:
    problem: dict
    seed: int = 0
    paths: int = 100
    dt: float = 0.01
    tol: float = 1e-10
    max_iter: int = 100
    workers: int = 1
    method: str = "picard"
    out: Path = field(default_factory=lambda: Path("."))
    format: str = "csv"

    def __post_init__(self):
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max-iter must be >= 1")
        if self.method not in ("picard", "direct"):
            raise ConfigError("method must be 'picard' or 'direct'")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")


def _read_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from None


def resolve_config(args, environ=None) -> RunConfig:
    """Merge defaults < config file ``run`` block < FRACSDE_SEED < command-line flags."""
    environ = os.environ if environ is None else environ
    if getattr(args, "config", None):
        problem = _read_json(args.config)
    else:
        problem = PRESETS[getattr(args, "preset", None) or "example"]()
    if not isinstance(problem, dict):
        raise ConfigError("problem file must hold a JSON object")
    run = dict(RUN_DEFAULTS)
    file_run = problem.pop("run", {}) or {}
    unknown = set(file_run) - set(RUN_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown run fields {sorted(unknown)}")
    run.update(file_run)
    if environ.get("FRACSDE_SEED", "") != "":
        try:
            run["seed"] = int(environ["FRACSDE_SEED"])
        except ValueError:
            raise ConfigError("FRACSDE_SEED must be an integer") from None
    for key in RUN_DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            run[key] = v
    return RunConfig(problem=problem, out=Path(getattr(args, "out", None) or "."), **run)


def _problem(cfg: RunConfig):
    try:
        return problem_from_dict(dict(cfg.problem))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid problem: {exc}") from None


def _constants(spec) -> dict:
    from .stability import resolve_constants
    return resolve_constants(spec).to_dict()


def _ensure_out(cfg: RunConfig) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg.out


# ----------------------------------------------------------------- commands

def cmd_check(cfg: RunConfig, samples: Optional[int] = None) -> int:
    from .conditions import check_contractor_conditions
    from .stability import criteria_report, write_json
    spec = _problem(cfg)
    report = criteria_report(spec)
    cc = check_contractor_conditions(spec, samples or cfg.paths, cfg.seed)
    report["contractors"] = cc.to_dict()
    report["seed"] = cfg.seed
    ok = bool(report["existence"]["pass"] and report["stability"]["pass"] and cc.passed)
    report["pass"] = ok
    out = _ensure_out(cfg)
    if cfg.format == "json":
        write_json(report, out / "report.json")
    else:
        with open(out / "report.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["criterion", "item", "value"])
            for name in ("existence", "stability"):
                crit = report[name]
                for k, v in crit.get("items", {}).items():
                    w.writerow([name, k, repr(float(v))])
                if "theta" in crit:
                    w.writerow([name, "theta", repr(float(crit["theta"]))])
                w.writerow([name, "pass", crit["pass"]])
            for row in cc.rows:
                w.writerow(["contractor", row.label, repr(float(row.max_ratio))])
            w.writerow(["contractor", "pass", cc.passed])
        write_json(report, out / "report.json")
    for name in ("existence", "stability"):
        crit = report[name]
        print(f"{name}: theta = {crit.get('theta', 'n/a')}  "
              f"{'PASS' if crit['pass'] else 'FAIL'}")
    print(f"contractor inequalities: {'PASS' if cc.passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CRITERION


def _divergence_exit(exc: DivergenceError, cfg: RunConfig) -> int:
    from .solver import write_residual_csv
    out = _ensure_out(cfg)
    write_residual_csv(exc.residual_history, out / "residuals.csv")
    print(f"solver diverged: {exc} (theta_exist = {exc.theta_exist}); "
          f"residual history in {out / 'residuals.csv'}", file=sys.stderr)
    return EXIT_DIVERGENCE


def cmd_simulate(cfg: RunConfig, save_paths: bool = False) -> int:
    from .solver import run_ensemble, write_trajectory_csv
    from .stability import estimate_moment, write_json, write_moment_csv
    spec = _problem(cfg)
    grid = spec.grid(cfg.dt)
    try:
        results = run_ensemble(spec, grid, cfg.paths, cfg.seed, cfg.method, cfg.tol,
                               cfg.max_iter, cfg.workers)
    except DivergenceError as exc:
        return _divergence_exit(exc, cfg)
    curve = estimate_moment([r.trajectory for r in results], spec.p)
    out = _ensure_out(cfg)
    if cfg.format == "json":
        write_json({"t": curve.t, "mean": curve.mean, "ci_low": curve.ci_low,
                    "ci_high": curve.ci_high, "paths": curve.paths, "p": curve.p,
                    "seed": cfg.seed, "constants": _constants(spec)}, out / "moment.json")
    else:
        write_moment_csv(curve, out / "moment.csv")
    if save_paths:
        for r in results:
            write_trajectory_csv(r.trajectory, out / f"path_{r.path_index:05d}.csv")
    print(f"{cfg.paths} paths on {grid.steps} steps; moment curve written to {out}")
    return EXIT_OK


def cmd_picard(cfg: RunConfig, path_index: int = 0) -> int:
    from .solver import solve_path, write_residual_csv, write_trajectory_csv
    from .stability import write_json
    spec = _problem(cfg)
    grid = spec.grid(cfg.dt)
    try:
        res = solve_path(spec, grid, cfg.seed, path_index, "picard", cfg.tol, cfg.max_iter)
    except DivergenceError as exc:
        return _divergence_exit(exc, cfg)
    out = _ensure_out(cfg)
    if cfg.format == "json":
        write_json({"t": res.trajectory.times, "states": res.trajectory.states,
                    "iterations": res.iterations, "residuals": res.residual_history,
                    "seed": cfg.seed, "path_index": path_index,
                    "constants": _constants(spec)}, out / "picard.json")
    else:
        write_trajectory_csv(res.trajectory, out / "trajectory.csv")
        write_residual_csv(res.residual_history, out / "residuals.csv")
    print(f"converged in {res.iterations} iterations "
          f"(final residual {res.residual_history[-1]:.3e})")
    return EXIT_OK


def read_curve_csv(path, value_column: str = "mean"):
    """Read ``t`` and ``value_column`` from a CSV file."""
    import numpy as np
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for col in ("t", value_column):
            if col not in cols:
                raise ConfigError(f"{path}: missing column {col!r} (found {cols})")
        rows = list(reader)
    try:
        t = np.array([float(r["t"]) for r in rows])
        v = np.array([float(r[value_column]) for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from None
    return t, v


def cmd_fit(cfg: RunConfig, curve: str, window=None, column: str = "mean") -> int:
    from .stability import fit_decay, write_json
    t, v = read_curve_csv(curve, column)
    try:
        fit = fit_decay(t, v, tuple(window) if window else None)
    except FitDomainError as exc:
        raise ConfigError(str(exc)) from None
    out = _ensure_out(cfg)
    write_json(fit.to_dict(), out / "fit.json")
    print(f"mu_hat = {fit.mu_hat:.6g}  N_hat = {fit.n_hat:.6g}  R^2 = {fit.r_squared:.4f}  "
          f"CI = [{fit.ci[0]:.4g}, {fit.ci[1]:.4g}]")
    return EXIT_OK


def cmd_example(args) -> int:
    d = PRESETS[args.preset or "example"]()
    text = json.dumps(d, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracsde", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, solver=True):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", help="problem JSON file")
        src.add_argument("--preset", choices=sorted(PRESETS), help="built-in problem")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=["csv", "json"])
        if solver:
            p.add_argument("--paths", type=int)
            p.add_argument("--dt", type=float)
            p.add_argument("--tol", type=float)
            p.add_argument("--max-iter", dest="max_iter", type=int)
            p.add_argument("--workers", type=int)
            p.add_argument("--method", choices=["picard", "direct"])

    p = sub.add_parser("check", help="evaluate both criteria and the contractor inequalities")
    common(p, solver=False)
    p.add_argument("--paths", type=int, help="Monte Carlo samples for the contractor check")
    p = sub.add_parser("simulate", help="ensemble simulation and moment curve")
    common(p)
    p.add_argument("--save-paths", action="store_true")
    p = sub.add_parser("picard", help="successive approximations on one path")
    common(p)
    p.add_argument("--path-index", type=int, default=0)
    p = sub.add_parser("fit", help="fit exponential decay to a moment curve CSV")
    p.add_argument("curve", help="CSV with columns t and mean")
    p.add_argument("--column", default="mean")
    p.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"))
    p.add_argument("--out")
    p = sub.add_parser("example", help="print a built-in problem as JSON")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--out", help="write to this file instead of stdout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "example":
            return cmd_example(args)
        if args.command == "fit":
            cfg = RunConfig(problem={}, out=Path(args.out or "."))
            return cmd_fit(cfg, args.curve, args.window, args.column)
        cfg = resolve_config(args)
        if args.command == "check":
            return cmd_check(cfg, args.paths or 1000)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.save_paths)
        if args.command == "picard":
            return cmd_picard(cfg, args.path_index)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
