"""Scenario grid, per-case pipeline, sweeps, and CSV report emission.

A scenario names a demand pattern (origin concentration, trip-length
distribution, density), a mode (bus or rail cost/operating parameters), a
value of time, and optional overrides for the sensitivity knobs (transfer
penalty, walk speed, backtrack aversion). ``run_case`` pushes one scenario
through the full pipeline: demand field, two-stage design search, all-stop
restriction, lower bound, discrete stop plan, exact re-evaluation.

Reports are plain CSVs with documented column orders. Reruns of the same
grid are byte-identical: floats are written with ``repr`` round-trip
precision, row order follows the config list, and wall-clock timings stay
on the in-memory results only.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field as dc_field
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .costs import ParamSet, bus_params, rail_params
from .demand import Corridor, DemandSpec, build_demand_field
from .exact_eval import ErrorReport, ExactCosts, error_report, exact_costs
from .heuristic import Solution, SolverSettings, stage2_solve
from .lower_bound import LowerBoundResult, lb_solve
from .stop_plan import StopPlan, build_stop_plan, fit_profiles

log = logging.getLogger(__name__)

BUS_DENSITIES = (37.5, 75.0, 150.0)  # trips/h/km, per direction
RAIL_DENSITIES = (250.0, 500.0, 1000.0)
ORIGIN_SDS = (None, 8.0, 4.0)  # None = uniform origins
TRIP_MEANS = (8.0, 12.0)
TRIP_SDS = (2.0, 4.0)
TABLE_MUS = (5.0, 10.0)
SWEEP_MUS = (5.0, 10.0, 20.0)


def _fmt(v: float) -> str:
    f = float(v)
    return f"{f:g}"


@dataclass(frozen=True)
class ScenarioConfig:
    """One corridor scenario. Defaults beyond the named fields match the
    cost tables; the override knobs exist for the sensitivity sweeps."""

    mode: str  # "bus" | "rail"
    sigma_o: float | None  # origin concentration, None = uniform
    e_l: float  # mean trip length, km
    sigma_l: float  # trip length sd, km
    mu: float  # value of time, $/h
    lambda_per_km: float  # directional demand density, trips/h/km
    c_t_min: float = 1.0  # transfer penalty, minutes
    v_w: float = 2.0  # walk speed, km/h
    w_b: float = 1.0  # backtrack aversion weight
    length_km: float = 40.0
    cells: int = 80

    def __post_init__(self):
        if self.mode not in ("bus", "rail"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.sigma_o is not None and self.sigma_o <= 0:
            raise ValueError("sigma_o must be positive or None")
        if min(self.e_l, self.sigma_l, self.mu, self.lambda_per_km) <= 0:
            raise ValueError("demand parameters must be positive")
        if min(self.c_t_min, self.v_w) < 0 or self.w_b < 0:
            raise ValueError("override knobs must be non-negative")

    @property
    def case_id(self) -> str:
        sig = "inf" if self.sigma_o is None else _fmt(self.sigma_o)
        slug = (
            f"{self.mode}-o{sig}-el{_fmt(self.e_l)}-sl{_fmt(self.sigma_l)}"
            f"-mu{_fmt(self.mu)}-d{_fmt(self.lambda_per_km)}"
        )
        if self.c_t_min != 1.0:
            slug += f"-ct{_fmt(self.c_t_min)}"
        if self.v_w != 2.0:
            slug += f"-vw{_fmt(self.v_w)}"
        if self.w_b != 1.0:
            slug += f"-wb{_fmt(self.w_b)}"
        if self.length_km != 40.0 or self.cells != 80:
            slug += f"-L{_fmt(self.length_km)}-n{self.cells}"
        return slug

    def corridor(self) -> Corridor:
        return Corridor(length_km=self.length_km, cells=self.cells)

    def demand_spec(self) -> DemandSpec:
        return DemandSpec(
            demand_rate=self.lambda_per_km * self.length_km,
            trip_len_mean=self.e_l,
            trip_len_sd=self.sigma_l,
            origin_sd=self.sigma_o,
        )

    def params(self) -> ParamSet:
        factory = bus_params if self.mode == "bus" else rail_params
        return factory(
            self.mu,
            transfer_penalty=self.c_t_min / 60.0,
            walk_speed=self.v_w,
            backtrack_weight=self.w_b,
        )

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)


def table1_grid() -> list:
    """The 144-case grid: both modes, three origin spreads, two trip-length
    means, two sds, two values of time, three densities per mode."""
    out = []
    for mode, densities in (("bus", BUS_DENSITIES), ("rail", RAIL_DENSITIES)):
        for sigma_o in ORIGIN_SDS:
            for e_l in TRIP_MEANS:
                for sigma_l in TRIP_SDS:
                    for mu in TABLE_MUS:
                        for dens in densities:
                            out.append(
                                ScenarioConfig(
                                    mode=mode,
                                    sigma_o=sigma_o,
                                    e_l=e_l,
                                    sigma_l=sigma_l,
                                    mu=mu,
                                    lambda_per_km=dens,
                                )
                            )
    return out


def sweep_grid(mus=SWEEP_MUS) -> list:
    """Default sweep: the Table-1 grid extended to the listed values of
    time (the high-wage extension included)."""
    out = []
    for mode, densities in (("bus", BUS_DENSITIES), ("rail", RAIL_DENSITIES)):
        for sigma_o in ORIGIN_SDS:
            for e_l in TRIP_MEANS:
                for sigma_l in TRIP_SDS:
                    for mu in mus:
                        for dens in densities:
                            out.append(
                                ScenarioConfig(
                                    mode=mode,
                                    sigma_o=sigma_o,
                                    e_l=e_l,
                                    sigma_l=sigma_l,
                                    mu=mu,
                                    lambda_per_km=dens,
                                )
                            )
    return out


@dataclass(frozen=True)
class CaseResult:
    """Everything one scenario produced. Timings are seconds; they are
    logged but never written to the report CSVs."""

    config: ScenarioConfig
    status: str  # "ok" | "infeasible" | "error: ..."
    binding: str = ""
    # Whether any skip-stop cell (m > 1 in either direction) solved within
    # capacity; when False the comparison against all-stop is vacuous and the
    # case should be treated as a missing point in savings sweeps.
    ab_feasible: bool = False
    solution: Solution | None = None
    all_stop: Solution | None = None
    lower: LowerBoundResult | None = None
    plan: StopPlan | None = None
    exact: ExactCosts | None = None
    report: ErrorReport | None = None
    savings_pct: float = math.nan  # (GC_allstop - GC_AB) / GC_allstop
    gap_pct: float = math.nan  # (GC_AB - GC_LB) / GC_LB
    seconds: dict = dc_field(default_factory=dict)

    @property
    def case_id(self) -> str:
        return self.config.case_id


def run_case(config: ScenarioConfig, settings: SolverSettings | None = None) -> CaseResult:
    """Full pipeline for one scenario."""
    t0 = time.perf_counter()
    corridor = config.corridor()
    params = config.params()
    field = build_demand_field(corridor, config.demand_spec())
    t1 = time.perf_counter()

    result = stage2_solve(field, params, settings=settings or SolverSettings())
    t2 = time.perf_counter()
    if result.status != "ok" or result.best is None:
        return CaseResult(
            config=config,
            status="infeasible",
            binding=result.reason,
            seconds={"preprocess": t1 - t0, "solve": t2 - t1},
        )
    best = result.best
    all_stop = result.all_stop
    ab_feasible = any(
        c.status == "ok" and (c.m_cw > 1 or c.m_ccw > 1) for c in result.cells
    )

    lower = lb_solve(field, params)
    t3 = time.perf_counter()

    plan = build_stop_plan(corridor, best.profiles, best.scalars.m_cw, best.scalars.m_ccw)
    exact = exact_costs(field, plan, best.scalars, params)
    report = error_report(exact.breakdown, best.breakdown)
    t4 = time.perf_counter()

    savings = math.nan
    if all_stop is not None and all_stop.feasible and best.feasible:
        savings = (all_stop.gc - best.gc) / all_stop.gc
    gap = math.nan
    if lower.status == "ok":
        gap = (best.gc - lower.gc_lb) / lower.gc_lb

    seconds = {
        "preprocess": t1 - t0,
        "solve": t2 - t1,
        "bound": t3 - t2,
        "plan_eval": t4 - t3,
    }
    log.info(
        "%s: GC=%.2f savings=%.3f%% gap=%.3f%% [%.2fs pre, %.2fs solve, %.2fs bound]",
        config.case_id,
        best.gc,
        100 * savings,
        100 * gap,
        seconds["preprocess"],
        seconds["solve"],
        seconds["bound"],
    )
    return CaseResult(
        config=config,
        status="ok",
        binding=best.binding,
        ab_feasible=ab_feasible,
        solution=best,
        all_stop=all_stop,
        lower=lower,
        plan=plan,
        exact=exact,
        report=report,
        savings_pct=savings,
        gap_pct=gap,
        seconds=seconds,
    )


def _run_case_guarded(args):
    config, settings = args
    try:
        return run_case(config, settings)
    except Exception as exc:  # isolate per-cell failures
        log.exception("case %s failed", config.case_id)
        return CaseResult(config=config, status=f"error: {exc}")


def run_sweep(
    configs: list,
    settings: SolverSettings | None = None,
    workers: int | None = None,
) -> list:
    """Run every config; output order follows the input order regardless of
    worker scheduling, so reports are deterministic."""
    jobs = [(c, settings) for c in configs]
    if workers and workers > 1:
        with Pool(processes=workers) as pool:
            results = pool.map(_run_case_guarded, jobs)
    else:
        results = [_run_case_guarded(j) for j in jobs]
    return results


# ---------------------------------------------------------------------------
# report emission

CASES_COLUMNS = (
    "case_id",
    "mode",
    "sigma_o",
    "e_l",
    "sigma_l",
    "mu",
    "lambda_per_km",
    "c_t_min",
    "v_w",
    "w_b",
    "status",
    "binding",
    "ab_feasible",
    "m_cw",
    "m_ccw",
    "headway_cw_min",
    "headway_ccw_min",
    "n_stops",
    "gc_ab",
    "gc_all_stop",
    "gc_lower_bound",
    "savings_frac",
    "gap_frac",
    "user_cost",
    "agency_cost",
    "capacity_ok",
    "max_load_ratio",
    "err_gc",
    "err_user",
    "err_agency",
    "err_access",
    "err_wait",
    "err_in_vehicle",
    "err_transfer",
    "err_op_distance",
    "err_op_time",
    "err_infra_line",
    "err_infra_stop",
)

PROFILE_COLUMNS = ("x_km", "spacing_km", "stops_per_bay", "b_cw", "b_ccw")

PLAN_COLUMNS = (
    "stop",
    "x_km",
    "is_transfer",
    "line_cw",
    "line_ccw",
    "gap_after_km",
    "fitted_spacing_km",
)

ERROR_COLUMNS = ("component", "exact", "approx", "error", "absolute_flag")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return "nan" if math.isnan(f) else repr(f)
    return str(v)


def _write_csv(path: Path, columns, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])


def _case_row(res: CaseResult) -> dict:
    cfg = res.config
    row = {
        "case_id": res.case_id,
        "mode": cfg.mode,
        "sigma_o": math.inf if cfg.sigma_o is None else cfg.sigma_o,
        "e_l": cfg.e_l,
        "sigma_l": cfg.sigma_l,
        "mu": cfg.mu,
        "lambda_per_km": cfg.lambda_per_km,
        "c_t_min": cfg.c_t_min,
        "v_w": cfg.v_w,
        "w_b": cfg.w_b,
        "status": res.status,
        "binding": res.binding,
        "ab_feasible": res.ab_feasible,
    }
    empty = {c: None for c in CASES_COLUMNS if c not in row}
    row.update(empty)
    if res.solution is not None:
        sc = res.solution.scalars
        row.update(
            m_cw=sc.m_cw,
            m_ccw=sc.m_ccw,
            headway_cw_min=sc.headway_cw * 60.0,
            headway_ccw_min=sc.headway_ccw * 60.0,
            gc_ab=res.solution.gc,
            user_cost=res.solution.breakdown.user_total,
            agency_cost=res.solution.breakdown.agency_total,
            savings_frac=res.savings_pct,
            gap_frac=res.gap_pct,
        )
    if res.all_stop is not None:
        row["gc_all_stop"] = res.all_stop.gc
    if res.lower is not None and res.lower.status == "ok":
        row["gc_lower_bound"] = res.lower.gc_lb
    if res.plan is not None:
        row["n_stops"] = res.plan.n_stops
    if res.exact is not None:
        row["capacity_ok"] = res.exact.capacity_ok
        row["max_load_ratio"] = res.exact.max_load_ratio
    if res.report is not None:
        for err_row in res.report.rows:
            row[f"err_{err_row.name}"] = err_row.error
    return row


def emit_reports(results: list, out_dir) -> list:
    """Write cases.csv, summary.csv, and the per-case detail files. Returns
    the written paths in a deterministic order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "cases.csv"
    _write_csv(path, CASES_COLUMNS, [_case_row(r) for r in results])
    written.append(path)

    for res in results:
        if res.solution is None:
            continue
        cid = res.case_id
        sol = res.solution
        cor = res.config.corridor()

        rows = [
            {
                "x_km": x,
                "spacing_km": s,
                "stops_per_bay": t,
                "b_cw": bc,
                "b_ccw": bw,
            }
            for x, s, t, bc, bw in zip(
                cor.centers,
                sol.profiles.spacing,
                sol.profiles.stops_per_bay,
                sol.b_cw,
                sol.b_ccw,
            )
        ]
        path = out / f"profiles_{cid}.csv"
        _write_csv(path, PROFILE_COLUMNS, rows)
        written.append(path)

        plan = res.plan
        fit = fit_profiles(cor, sol.profiles)
        gaps = plan.realized_spacings()
        mids = (plan.positions + gaps / 2.0) % cor.length_km
        rows = [
            {
                "stop": i,
                "x_km": plan.positions[i],
                "is_transfer": bool(plan.is_transfer[i]),
                "line_cw": int(plan.line_cw[i]),
                "line_ccw": int(plan.line_ccw[i]),
                "gap_after_km": gaps[i],
                "fitted_spacing_km": float(fit.spacing(mids[i])),
            }
            for i in range(plan.n_stops)
        ]
        path = out / f"plan_{cid}.csv"
        _write_csv(path, PLAN_COLUMNS, rows)
        written.append(path)

        rows = [
            {
                "component": r.name,
                "exact": r.exact,
                "approx": r.approx,
                "error": r.error,
                "absolute_flag": r.absolute,
            }
            for r in res.report.rows
        ]
        path = out / f"errors_{cid}.csv"
        _write_csv(path, ERROR_COLUMNS, rows)
        written.append(path)

    path = out / "summary.csv"
    _write_csv(path, ("metric", "value"), _summary_rows(results))
    written.append(path)
    return written


def _summary_rows(results: list) -> list:
    ok = [r for r in results if r.status == "ok"]
    rows = [
        {"metric": "n_cases", "value": len(results)},
        {"metric": "n_ok", "value": len(ok)},
        {"metric": "n_infeasible", "value": sum(r.status == "infeasible" for r in results)},
        {"metric": "n_error", "value": sum(r.status.startswith("error") for r in results)},
    ]

    def stat(name, values):
        vals = [v for v in values if not math.isnan(v)]
        rows.append({"metric": f"mean_{name}", "value": float(np.mean(vals)) if vals else math.nan})
        rows.append({"metric": f"max_{name}", "value": float(np.max(vals)) if vals else math.nan})

    stat("gap_frac", [r.gap_pct for r in ok])
    stat("savings_frac", [r.savings_pct for r in ok])
    if ok:
        rows.append(
            {"metric": "min_savings_frac", "value": float(np.min([r.savings_pct for r in ok]))}
        )
    for name in (
        "gc",
        "user",
        "agency",
        "access",
        "wait",
        "in_vehicle",
        "transfer",
        "op_distance",
        "op_time",
        "infra_line",
        "infra_stop",
    ):
        stat(
            f"err_{name}",
            [r.report.by_name()[name].error for r in ok if r.report is not None],
        )
    stat("max_load_ratio", [r.exact.max_load_ratio for r in ok if r.exact is not None])
    return rows
