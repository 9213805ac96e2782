"""Command-line interface.

Verbs: ``solve`` (one scenario), ``sweep`` (a scenario grid), ``plan``
(discrete stop plan for a solved scenario), ``verify`` (exact re-evaluation
and error table), ``bound`` (lower bound only). Scenario fields come from
flags, optionally seeded by an INI config file (``--config``): section
``[scenario]`` mirrors the flag names, ``[solver]`` the solver settings,
``[sweep]`` the sweep controls. Flags win over the file; the file wins over
built-in defaults. Exit status: 0 on success, 1 when the scenario is
infeasible or a pipeline stage fails, 2 on invalid arguments or config.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import logging
import math
import sys
from pathlib import Path

from .demand import build_demand_field
from .experiments import (
    CaseResult,
    ScenarioConfig,
    emit_reports,
    run_case,
    run_sweep,
    sweep_grid,
    table1_grid,
)
from .heuristic import SolverSettings
from .lower_bound import lb_solve

log = logging.getLogger(__name__)

_SCENARIO_FIELDS = {
    "mode": str,
    "sigma_o": float,  # "inf" accepted
    "e_l": float,
    "sigma_l": float,
    "mu": float,
    "lambda_per_km": float,
    "c_t_min": float,
    "v_w": float,
    "w_b": float,
    "length_km": float,
    "cells": int,
}

_SOLVER_FIELDS = {
    "relaxation": float,
    "tol_backtrack": float,
    "tol_headway": float,
    "max_stops_per_bay": int,
    "max_inner_iterations": int,
    "max_outer_iterations": int,
    "spacing_cap_km": float,
}

_DEFAULT_SCENARIO = {
    "mode": "bus",
    "sigma_o": math.inf,
    "e_l": 8.0,
    "sigma_l": 2.0,
    "mu": 10.0,
    "lambda_per_km": 75.0,
    "c_t_min": 1.0,
    "v_w": 2.0,
    "w_b": 1.0,
    "length_km": 40.0,
    "cells": 80,
}


class CliError(Exception):
    """Invalid arguments or config file; maps to exit status 2."""


def _parse_value(name: str, raw: str, typ):
    raw = raw.strip()
    if name == "sigma_o" and raw.lower() in ("inf", "none", ""):
        return math.inf
    try:
        return typ(raw)
    except ValueError as exc:
        raise CliError(f"bad value for {name}: {raw!r}") from exc


def _load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise CliError(f"config file not found: {path}")
    out = {"scenario": {}, "solver": {}, "sweep": {}}
    for section, fields in (("scenario", _SCENARIO_FIELDS), ("solver", _SOLVER_FIELDS)):
        if parser.has_section(section):
            for key, raw in parser.items(section):
                if key not in fields:
                    raise CliError(f"unknown key [{section}] {key}")
                out[section][key] = _parse_value(key, raw, fields[key])
    if parser.has_section("sweep"):
        for key, raw in parser.items("sweep"):
            if key == "mus":
                out["sweep"]["mus"] = tuple(
                    _parse_value("mus", part, float) for part in raw.split(",") if part.strip()
                )
            elif key == "workers":
                out["sweep"]["workers"] = _parse_value("workers", raw, int)
            elif key == "grid":
                if raw.strip() not in ("table1", "default"):
                    raise CliError(f"unknown sweep grid {raw!r}")
                out["sweep"]["grid"] = raw.strip()
            else:
                raise CliError(f"unknown key [sweep] {key}")
    return out


def _scenario_from(args: argparse.Namespace, file_cfg: dict) -> ScenarioConfig:
    merged = dict(_DEFAULT_SCENARIO)
    merged.update(file_cfg.get("scenario", {}))
    for name in _SCENARIO_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if merged["sigma_o"] is not None and math.isinf(merged["sigma_o"]):
        merged["sigma_o"] = None
    try:
        return ScenarioConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc)) from exc


def _settings_from(file_cfg: dict) -> SolverSettings:
    overrides = file_cfg.get("solver", {})
    try:
        return dataclasses.replace(SolverSettings(), **overrides)
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc)) from exc


def _sigma_o_flag(raw: str) -> float:
    try:
        return _parse_value("sigma_o", raw, float)
    except CliError as exc:
        # argparse only understands its own error type; anything else
        # would escape parse_args as a traceback instead of exit code 2
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_scenario_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="INI file with [scenario]/[solver]/[sweep] sections")
    sub.add_argument("--mode", choices=("bus", "rail"))
    sub.add_argument("--sigma-o", dest="sigma_o", type=_sigma_o_flag,
                     help="origin concentration sd in km, or 'inf' for uniform")
    sub.add_argument("--e-l", dest="e_l", type=float, help="mean trip length, km")
    sub.add_argument("--sigma-l", dest="sigma_l", type=float, help="trip length sd, km")
    sub.add_argument("--mu", type=float, help="value of time, $/h")
    sub.add_argument("--lambda-per-km", dest="lambda_per_km", type=float,
                     help="directional demand density, trips/h/km")
    sub.add_argument("--c-t-min", dest="c_t_min", type=float, help="transfer penalty, minutes")
    sub.add_argument("--v-w", dest="v_w", type=float, help="walk speed, km/h")
    sub.add_argument("--w-b", dest="w_b", type=float, help="backtrack aversion weight")
    sub.add_argument("--length-km", dest="length_km", type=float, help="loop length, km")
    sub.add_argument("--cells", type=int, help="demand grid cells")
    sub.add_argument("--out", help="directory for report CSVs")


def _print_solution(res: CaseResult) -> None:
    sol = res.solution
    sc = sol.scalars
    print(f"case {res.case_id}: status={res.status}")
    print(
        f"  lines m=({sc.m_cw},{sc.m_ccw})  headways=({sc.headway_cw * 60:.2f},"
        f"{sc.headway_ccw * 60:.2f}) min  stops={res.plan.n_stops}"
    )
    b = sol.breakdown
    print(f"  GC={b.total:.2f} h/h  (user {b.user_total:.2f}, agency {b.agency_total:.2f})")
    if res.all_stop is not None:
        print(f"  all-stop GC={res.all_stop.gc:.2f}  savings={100 * res.savings_pct:.2f}%")
    if res.lower is not None and res.lower.status == "ok":
        print(f"  lower bound={res.lower.gc_lb:.2f}  gap={100 * res.gap_pct:.2f}%")
    if res.binding:
        print(f"  binding: {res.binding}")


def _cmd_solve(args, file_cfg) -> int:
    config = _scenario_from(args, file_cfg)
    res = run_case(config, _settings_from(file_cfg))
    if res.status != "ok":
        print(f"case {config.case_id}: {res.status} ({res.binding})", file=sys.stderr)
        return 1
    _print_solution(res)
    if args.out:
        paths = emit_reports([res], args.out)
        print(f"  wrote {len(paths)} files to {args.out}")
    return 0


def _cmd_sweep(args, file_cfg) -> int:
    sweep_cfg = file_cfg.get("sweep", {})
    mus = args.mus or sweep_cfg.get("mus")
    grid_name = args.grid or sweep_cfg.get("grid") or "default"
    if grid_name == "table1":
        grid = table1_grid()
    elif mus:
        grid = sweep_grid(mus=tuple(mus))
    else:
        grid = sweep_grid()
    workers = args.workers if args.workers is not None else sweep_cfg.get("workers")
    results = run_sweep(grid, settings=_settings_from(file_cfg), workers=workers)
    out = args.out or "reports"
    paths = emit_reports(results, out)
    n_ok = sum(r.status == "ok" for r in results)
    print(f"sweep: {n_ok}/{len(results)} cases ok; wrote {len(paths)} files to {out}")
    return 0 if n_ok == len(results) else 1


def _cmd_plan(args, file_cfg) -> int:
    config = _scenario_from(args, file_cfg)
    res = run_case(config, _settings_from(file_cfg))
    if res.status != "ok":
        print(f"case {config.case_id}: {res.status} ({res.binding})", file=sys.stderr)
        return 1
    plan = res.plan
    if args.out:
        paths = emit_reports([res], args.out)
        print(f"wrote {len(paths)} files to {args.out}")
    else:
        print("stop,x_km,is_transfer,line_cw,line_ccw")
        for row in plan.to_rows():
            print(
                f"{row['stop']},{row['x_km']:.5f},{row['is_transfer']},"
                f"{row['line_cw']},{row['line_ccw']}"
            )
    print(
        f"# {plan.n_stops} stops, {int(plan.is_transfer.sum())} transfer stops, "
        f"m=({plan.m_cw},{plan.m_ccw})",
        file=sys.stderr,
    )
    return 0


def _cmd_verify(args, file_cfg) -> int:
    config = _scenario_from(args, file_cfg)
    res = run_case(config, _settings_from(file_cfg))
    if res.status != "ok":
        print(f"case {config.case_id}: {res.status} ({res.binding})", file=sys.stderr)
        return 1
    print(f"case {config.case_id}: exact vs approximate costs")
    print(f"{'component':14s} {'exact':>12s} {'approx':>12s} {'error':>9s}")
    for row in res.report.rows:
        err = f"{100 * row.error:8.3f}%" if not row.absolute else f"{row.error:9.4f}"
        print(f"{row.name:14s} {row.exact:12.3f} {row.approx:12.3f} {err}")
    cap = "ok" if res.exact.capacity_ok else "VIOLATED"
    print(f"capacity: {cap} (max load ratio {res.exact.max_load_ratio:.3f})")
    if args.out:
        paths = emit_reports([res], args.out)
        print(f"wrote {len(paths)} files to {args.out}")
    return 0


def _cmd_bound(args, file_cfg) -> int:
    config = _scenario_from(args, file_cfg)
    field = build_demand_field(config.corridor(), config.demand_spec())
    lower = lb_solve(field, config.params())
    if lower.status != "ok":
        print(f"case {config.case_id}: lower bound {lower.status} ({lower.reason})",
              file=sys.stderr)
        return 1
    print(
        f"case {config.case_id}: GC lower bound {lower.gc_lb:.2f} h/h at "
        f"m=({lower.m_cw},{lower.m_ccw}), headways=({lower.headway_cw * 60:.2f},"
        f"{lower.headway_ccw * 60:.2f}) min"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skipstop",
        description="Optimal corridor skip-stop transit design",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="INFO-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (
        ("solve", "design one scenario and report costs"),
        ("plan", "emit the discrete stop plan for a scenario"),
        ("verify", "exact re-evaluation of the designed plan"),
        ("bound", "lower bound for a scenario"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_scenario_flags(p)
    p = sub.add_parser("sweep", help="run a scenario grid and emit reports")
    _add_scenario_flags(p)
    p.add_argument("--grid", choices=("table1", "default"), help="which built-in grid to run")
    p.add_argument("--mus", type=float, nargs="+", help="values of time for the default grid")
    p.add_argument("--workers", type=int, help="parallel worker count")
    return parser


_HANDLERS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "plan": _cmd_plan,
    "verify": _cmd_verify,
    "bound": _cmd_bound,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        file_cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
        return _HANDLERS[args.command](args, file_cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pipeline failure, not argument misuse
        log.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
