"""Batch experiment driver.

    hermite-sde {solve|compare|moments|check} --config cfg.json --out dir/

Exit codes: 0 success, 1 path-independence check failed, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import config as config_mod
from .baselines import euler_maruyama, generate_paths, mc_moments, milstein
from .errors import ConfigurationError, EvaluationError, HermiteSdeError, SolverError
from .models import ModelSpec, build_model, check_path_independence, probe_grid
from .quadrature import build_rule, expect
from .solver import ExpansionSolution, SolverConfig, evaluate, higher_moment, integrate, moments

log = logging.getLogger("hermite_sde")

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

ERROR_COLUMNS = ["t", "err_expansion_mean", "err_expansion_max", "err_em_mean", "err_em_max",
                 "err_mil_mean", "err_mil_max"]
MOMENT_COLUMNS = ["t", "mean_expansion", "var_expansion", "m3", "m4"]
MC_COLUMNS = ["mean_mc", "var_mc", "mc_stderr"]


class NoOracleError(ConfigurationError):
    """Comparison requested for a model without an exact solution map."""


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Parse a table written by :func:`write_csv` back into floats."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite_or_none(v):
    return float(v) if v is not None and math.isfinite(v) else None


def solver_config(cfg) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(N=s.N, M=s.M, Q=s.Q, startup_epsilon=s.startup_epsilon,
                        rk2_variant=s.rk2_variant, startup_proxy=s.startup_proxy)


def _model(cfg) -> ModelSpec:
    return build_model(cfg.model.name, cfg.model.params)


def _out_dir(cfg, out) -> Path:
    d = Path(out if out is not None else cfg.outputs.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _solve(model: ModelSpec, cfg) -> ExpansionSolution:
    target = model.solve_target
    return integrate(target.problem(float(cfg.solver.T)), solver_config(cfg))


def _expansion_state(model: ModelSpec, solution: ExpansionSolution, w, i: int):
    v = evaluate(solution, w, i)
    return model.from_companion(v) if model.companion is not None else v


def state_moments(model: ModelSpec, solution: ExpansionSolution, i: int) -> tuple[float, float, float, float]:
    """Mean, variance, third and fourth raw moments of the modelled state.

    Without a companion, mean and variance come from the coefficients alone.
    When the expansion is of a companion variable, moments of the mapped
    state are taken by quadrature of the mapped truncated expansion.
    """
    t = float(solution.times[i])
    if model.companion is None:
        mom = moments(solution, i)
        if t == 0.0:
            return mom.mean, mom.variance, mom.mean**3, mom.mean**4
        return mom.mean, mom.variance, higher_moment(solution, i, 3), higher_moment(solution, i, 4)
    if t == 0.0:
        x = float(model.from_companion(solution.coefficients[0][0]))
        return x, 0.0, x**3, x**4
    # mapped state is a polynomial of degree 2N at most for the square map
    rule = build_rule(max(solution.config.Q, 4 * solution.N + 1))
    raw = [expect(lambda w: _expansion_state(model, solution, w, i) ** k, t, rule) for k in (1, 2, 3, 4)]
    return raw[0], raw[1] - raw[0] ** 2, raw[2], raw[3]


def run_solve(cfg, out=None) -> tuple[ExpansionSolution, dict]:
    model = _model(cfg)
    t0 = time.perf_counter()
    sol = _solve(model, cfg)
    runtime = time.perf_counter() - t0
    d = _out_dir(cfg, out)
    N = sol.N
    files = {}
    if "csv" in cfg.outputs.formats:
        rows = ([t, *a] for t, a in zip(sol.times, sol.coefficients))
        files["coefficients"] = str(write_csv(d / "coefficients.csv", ["t"] + [f"a{n}" for n in range(N + 1)], rows))
    summary = {
        "command": "solve",
        "config": cfg.to_dict(),
        "solved_model": model.solve_target.name,
        "runtime_seconds": {"expansion": runtime},
        "diagnostics": _solver_diagnostics(sol),
    }
    if "json" in cfg.outputs.formats:
        files["summary"] = str(_write_json(d / "summary.json", summary))
    summary["files"] = files
    return sol, summary


def _solver_diagnostics(sol: ExpansionSolution) -> dict:
    d = sol.diagnostics
    return {
        "clamp_count": int(d.get("clamp_count", 0)),
        "rhs_evaluations": int(d.get("rhs_evaluations", 0)),
        "startup_times": list(d.get("startup_times", [])),
    }


def _baselines(model: ModelSpec, cfg, ensemble):
    b = cfg.baselines
    problem = model.problem(float(cfg.solver.T))
    results, runtimes = {}, {}
    if not b.enabled:
        return results, runtimes
    if "em" in b.schemes:
        t0 = time.perf_counter()
        results["em"] = euler_maruyama(problem, ensemble, predictor_corrector=b.predictor_corrector)
        runtimes["em"] = time.perf_counter() - t0
    if "milstein" in b.schemes:
        t0 = time.perf_counter()
        results["milstein"] = milstein(problem, ensemble, gx=model.diffusion_dx)
        runtimes["milstein"] = time.perf_counter() - t0
    return results, runtimes


def _abs_err_stats(values, exact):
    e = np.abs(np.asarray(values, dtype=float) - exact)
    if not np.isfinite(e).any():
        return math.nan, math.nan
    return float(np.nanmean(e)), float(np.nanmax(e))


def run_compare(cfg, out=None) -> dict:
    model = _model(cfg)
    if model.exact is None:
        raise NoOracleError(f"no oracle: model {model.name!r} has no exact solution map", "model.name")
    T, M = float(cfg.solver.T), cfg.solver.M
    t0 = time.perf_counter()
    sol = _solve(model, cfg)
    runtimes = {"expansion": time.perf_counter() - t0}
    b = cfg.baselines
    ensemble = generate_paths(b.seed, b.paths, M, T)
    W = ensemble.W
    results, scheme_rt = _baselines(model, cfg, ensemble)
    runtimes.update(scheme_rt)
    rows = []
    worst = {"expansion": 0.0, "em": math.nan, "milstein": math.nan}
    for i in range(0, M + 1, cfg.compare.time_stride):
        t = float(sol.times[i])
        exact = model.exact(t, W[:, i])
        row = [t, *_abs_err_stats(_expansion_state(model, sol, W[:, i], i), exact)]
        worst["expansion"] = max(worst["expansion"], row[2])
        for key in ("em", "milstein"):
            if key in results:
                stats = _abs_err_stats(results[key].trajectories[:, i], exact)
                worst[key] = np.nanmax([worst[key], stats[1]])
            else:
                stats = (math.nan, math.nan)
            row.extend(stats)
        rows.append(row)
    d = _out_dir(cfg, out)
    files = {}
    if "csv" in cfg.outputs.formats:
        files["errors"] = str(write_csv(d / "errors.csv", ERROR_COLUMNS, rows))
    summary = {
        "command": "compare",
        "config": cfg.to_dict(),
        "seed": b.seed,
        "max_abs_error": {k: _finite_or_none(v) for k, v in worst.items()},
        "runtime_seconds": runtimes,
        "clamp_counts": {
            "expansion": int(sol.diagnostics.get("clamp_count", 0)),
            **{k: int(r.clamp_counts.sum()) for k, r in results.items()},
        },
        "failed_paths": {k: list(r.failed_paths) for k, r in results.items()},
        "diagnostics": _solver_diagnostics(sol),
    }
    if "json" in cfg.outputs.formats:
        files["summary"] = str(_write_json(d / "summary.json", summary))
    summary["files"] = files
    summary["rows"] = rows
    return summary


def run_moments(cfg, out=None) -> dict:
    model = _model(cfg)
    T, M = float(cfg.solver.T), cfg.solver.M
    t0 = time.perf_counter()
    sol = _solve(model, cfg)
    runtimes = {"expansion": time.perf_counter() - t0}
    b = cfg.baselines
    mc_traj = None
    if b.enabled and b.schemes:
        ensemble = generate_paths(b.seed, b.paths, M, T)
        results, scheme_rt = _baselines(model, cfg, ensemble)
        runtimes.update(scheme_rt)
        mc_scheme = "milstein" if "milstein" in results else "em"
        mc_traj = results[mc_scheme].trajectories
    header = MOMENT_COLUMNS + (MC_COLUMNS if mc_traj is not None else [])
    rows = []
    for i in range(M + 1):
        row = [float(sol.times[i]), *state_moments(model, sol, i)]
        if mc_traj is not None:
            col = mc_traj[:, i]
            if i == 0:
                row.extend([float(np.nanmean(col)), 0.0, 0.0])
            else:
                mc = mc_moments(col)
                row.extend([mc.mean, mc.variance, mc.mean_stderr])
        rows.append(row)
    d = _out_dir(cfg, out)
    files = {}
    if "csv" in cfg.outputs.formats:
        files["moments"] = str(write_csv(d / "moments.csv", header, rows))
    summary = {
        "command": "moments",
        "config": cfg.to_dict(),
        "seed": b.seed,
        "runtime_seconds": runtimes,
        "mc_scheme": (mc_scheme if mc_traj is not None else None),
        "diagnostics": _solver_diagnostics(sol),
    }
    if "json" in cfg.outputs.formats:
        files["summary"] = str(_write_json(d / "summary.json", summary))
    summary["files"] = files
    summary["header"], summary["rows"] = header, rows
    return summary


def run_check(cfg, out=None) -> dict:
    model = _model(cfg)
    c = cfg.check
    (xlo, xhi), (tlo, thi) = model.probe_domain
    domain = (tuple(c.x_range) if c.x_range else (xlo, xhi), tuple(c.t_range) if c.t_range else (tlo, thi))
    report = check_path_independence(model.problem(float(cfg.solver.T)), probe_grid(domain, c.nx, c.nt), c.tol)
    d = _out_dir(cfg, out)
    payload = {"command": "check", "model": model.name, "config": cfg.to_dict(), **report.as_dict()}
    files = {}
    if "csv" in cfg.outputs.formats:
        rows = [[x, t, r, bd] for (x, t), r, bd in zip(report.points, report.residuals, report.bounds)]
        files["residuals"] = str(write_csv(d / "residuals.csv", ["x", "t", "residual", "bound"], rows))
    if "json" in cfg.outputs.formats:
        files["report"] = str(_write_json(d / "check.json", payload))
    payload["files"] = files
    payload["passed"] = report.passed
    return payload


COMMANDS = {"solve": run_solve, "compare": run_compare, "moments": run_moments, "check": run_check}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hermite-sde", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment configuration (JSON)")
        sp.add_argument("--out", default=None, help="output directory (overrides outputs.directory)")
        sp.add_argument("--seed", type=int, default=None, help="override baselines.seed")
        sp.add_argument("--quiet", action="store_true", help="only report errors")
    return p


def _report(command, result, quiet):
    if quiet:
        return
    if command == "solve":
        sol, summary = result
        print(f"solved {summary['solved_model']} N={sol.N} M={len(sol.times) - 1}: a(T) = {np.array2string(sol.coefficients[-1], precision=6)}")
        for f in summary["files"].values():
            print(f"wrote {f}")
        return
    if command == "compare":
        for k, v in result["max_abs_error"].items():
            print(f"max abs error {k:10s} {v}")
    elif command == "check":
        print(f"{result['verdict']}: max residual {result['max_residual']:.3e}"
              + (f" at x={result['max_residual_at']['x']:.6g}, t={result['max_residual_at']['t']:.6g}"
                 if "max_residual_at" in result else ""))
    for f in result["files"].values():
        print(f"wrote {f}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = config_mod.load(args.config)
        if args.seed is not None:
            cfg.baselines.seed = args.seed
            config_mod.validate(cfg)
        log.info("running %s on model %s", args.command, cfg.model.name)
        result = COMMANDS[args.command](cfg, args.out)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        stage = f" [{exc.stage}]" if exc.stage else ""
        print(f"numerical failure{stage} at t={exc.time}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (EvaluationError, HermiteSdeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _report(args.command, result, args.quiet)
    if args.command == "check" and not result["passed"]:
        return EXIT_VERDICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
