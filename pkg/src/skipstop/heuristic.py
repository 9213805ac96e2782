"""Two-stage design heuristic.

Stage 1 fixes line counts and headways and chooses the spacing and
stops-per-bay profiles: at each grid point it enumerates integer bay sizes,
pairs each with its closed-form optimal spacing, and keeps the cheapest.
Backtracking density couples points to their neighborhood, so the stage
iterates with successive averages until the density it assumes matches the
density the profiles generate.

Stage 2 wraps stage 1 in a fixed-point loop on the two directional headways
(closed-form candidate clipped to the feasible window) and enumerates the
sixteen line-count pairs, keeping the generalized-cost minimizer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np

from .costs import (
    CostBreakdown,
    DesignProfiles,
    DesignScalars,
    ParamSet,
    commercial_pace,
    generalized_cost,
    pointwise_integrand,
    scalar_terms,
)
from .demand import DemandField, backtrack_densities

log = logging.getLogger(__name__)

_SPACING_FLOOR = 1e-3  # km; keeps transient capacity clamps from degenerating
_STALL_LIMIT = 25  # averaging iterations without residual progress before giving up


@dataclass(frozen=True)
class SolverSettings:
    """Knobs for both stages; defaults follow the reference setup."""

    relaxation: float = 0.5
    tol_backtrack: float = 1e-4
    tol_headway: float = 1e-4
    max_stops_per_bay: int = 30
    max_inner_iterations: int = 200
    max_outer_iterations: int = 60
    spacing_cap_km: float = 5.0
    line_candidates: tuple = (1, 2, 3, 4)

    def __post_init__(self):
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must be in (0, 1]")
        if self.max_stops_per_bay < 1:
            raise ValueError("max_stops_per_bay must be >= 1")


@dataclass(frozen=True)
class Stage1Result:
    profiles: DesignProfiles
    b_cw: np.ndarray
    b_ccw: np.ndarray
    converged: bool
    iterations: int


@dataclass(frozen=True)
class Solution:
    """A feasible design with its cost breakdown and solve diagnostics."""

    scalars: DesignScalars
    profiles: DesignProfiles
    b_cw: np.ndarray
    b_ccw: np.ndarray
    breakdown: CostBreakdown
    feasible: bool
    converged: bool
    binding: str
    iterations: int
    trace: tuple

    @property
    def gc(self) -> float:
        return self.breakdown.total


@dataclass(frozen=True)
class CellOutcome:
    m_cw: int
    m_ccw: int
    status: str  # "ok" | "infeasible"
    reason: str = ""
    solution: Solution | None = None


@dataclass(frozen=True)
class SolveResult:
    status: str  # "ok" | "infeasible"
    best: Solution | None
    cells: tuple
    reason: str = ""

    @property
    def all_stop(self) -> Solution | None:
        for cell in self.cells:
            if cell.m_cw == 1 and cell.m_ccw == 1:
                return cell.solution
        return None


def spacing_candidate(
    field: DemandField,
    scalars: DesignScalars,
    params: ParamSet,
    stops_per_bay,
    b_cw,
    b_ccw,
):
    """Unconstrained optimal spacing for given bay sizes and backtracking.

    Balances the dwell and stop-infrastructure savings of wider spacing
    against access walking and the backtrack detour. Broadcasts over leading
    axes of stops_per_bay.
    """
    t = np.asarray(stops_per_bay, dtype=float)
    mu = params.value_of_time
    ride_cw = field.flow_cw + params.cost_per_veh_h / (mu * scalars.headway_cw)
    ride_ccw = field.flow_ccw + params.cost_per_veh_h / (mu * scalars.headway_ccw)
    share_cw = (t + scalars.m_cw - 1.0) / (scalars.m_cw * t)
    share_ccw = (t + scalars.m_ccw - 1.0) / (scalars.m_ccw * t)
    num = (
        params.dwell_time * (ride_cw * share_cw + ride_ccw * share_ccw)
        + params.cost_per_stop_h / mu
    )
    pq = field.boarding_alighting_cw + field.boarding_alighting_ccw
    den = pq / (4.0 * params.walk_speed) + params.backtrack_weight * t * (
        np.asarray(b_cw) + np.asarray(b_ccw)
    ) / (3.0 * params.cruise_speed)
    return np.sqrt(num / np.maximum(den, 1e-300))


def clamp_spacing(
    s_tilde,
    field: DemandField,
    scalars: DesignScalars,
    params: ParamSet,
    stops_per_bay,
    b_cw,
    b_ccw,
    cap_km: float,
):
    """Apply the capacity clamp and practical bounds to a spacing candidate.

    The clamp keeps the backtracking add-on to the peak load within vehicle
    capacity at the current headways.
    """
    t = np.asarray(stops_per_bay, dtype=float)
    b_sum = np.asarray(b_cw) + np.asarray(b_ccw)
    room = np.minimum(
        2.0 * params.capacity / scalars.headway_cw - 2.0 * field.flow_cw,
        2.0 * params.capacity / scalars.headway_ccw - 2.0 * field.flow_ccw,
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = np.where(b_sum * t > 1e-12, room / np.maximum(b_sum * t, 1e-300), np.inf)
    return np.clip(np.minimum(s_tilde, cap), _SPACING_FLOOR, cap_km)


def stage1(
    field: DemandField,
    scalars: DesignScalars,
    params: ParamSet,
    settings: SolverSettings = SolverSettings(),
) -> Stage1Result:
    """Profile optimization at fixed scalars via successive averages.

    Each grid point is independent given the backtracking density, so the
    bay-size enumeration runs as one vectorized pass per iteration.
    """
    n = field.corridor.cells
    dx = field.corridor.dx
    t_grid = np.arange(1, settings.max_stops_per_bay + 1, dtype=float)[:, None]
    b_cw = np.zeros(n)
    b_ccw = np.zeros(n)
    no_backtrack = scalars.m_cw == 1 and scalars.m_ccw == 1

    profiles = None
    bhat_cw = bhat_ccw = np.zeros(n)
    converged = False
    iterations = 0
    best_residual = np.inf
    stall = 0
    for iterations in range(1, settings.max_inner_iterations + 1):
        s_tilde = spacing_candidate(field, scalars, params, t_grid, b_cw, b_ccw)
        s_star = clamp_spacing(
            s_tilde, field, scalars, params, t_grid, b_cw, b_ccw,
            settings.spacing_cap_km,
        )
        g = pointwise_integrand(
            field, scalars, params, s_star, t_grid, b_cw, b_ccw
        )
        g_min = g.min(axis=0)
        pick = np.argmax(g <= g_min + 1e-12, axis=0)  # smallest bay on ties
        cols = np.arange(n)
        profiles = DesignProfiles(s_star[pick, cols], t_grid[pick, 0])
        if no_backtrack:
            bhat_cw = bhat_ccw = np.zeros(n)
            converged = True
            break
        bhat_cw, bhat_ccw = backtrack_densities(
            field,
            profiles.spacing,
            profiles.stops_per_bay,
            scalars.m_cw,
            scalars.m_ccw,
            cap_window=True,
        )
        gap = np.abs(b_cw - bhat_cw) + np.abs(b_ccw - bhat_ccw)
        alpha = settings.relaxation
        b_cw = (1 - alpha) * b_cw + alpha * bhat_cw
        b_ccw = (1 - alpha) * b_ccw + alpha * bhat_ccw
        # post-update residual: |b_new - b_hat| = (1 - alpha) |b_old - b_hat|
        residual = float(np.max(gap)) * (1 - alpha)
        if residual <= settings.tol_backtrack:
            converged = True
            break
        # bay sizes are integers, so the averaging can settle into a small
        # limit cycle; stop once the residual stops improving
        if residual < best_residual * 0.99:
            best_residual = residual
            stall = 0
        else:
            stall += 1
            if stall >= _STALL_LIMIT:
                log.debug(
                    "profile averaging stalled at residual %.3g after %d iterations",
                    residual,
                    iterations,
                )
                break

    return Stage1Result(
        profiles=profiles,
        b_cw=bhat_cw,
        b_ccw=bhat_ccw,
        converged=converged,
        iterations=iterations,
    )


def headway_window(
    field: DemandField,
    params: ParamSet,
    m: int,
    direction: str,
    profiles: DesignProfiles | None = None,
    b_cw=None,
    b_ccw=None,
) -> tuple[float, float]:
    """Feasible headway interval (h): dispatching floor and capacity cap.

    The cap uses the peak on-board flow, including the backtracking add-on
    when profiles and densities are given.
    """
    lo = params.headway_min + (params.dwell_time if m > 1 else 0.0)
    flow = field.flow_cw if direction == "cw" else field.flow_ccw
    load = np.asarray(flow, dtype=float)
    if profiles is not None and b_cw is not None:
        load = load + profiles.stops_per_bay * profiles.spacing * (
            np.asarray(b_cw) + np.asarray(b_ccw)
        ) / 2.0
    peak = float(np.max(load))
    hi = params.capacity / peak if peak > 0 else np.inf
    return lo, hi


def headway_candidate(
    field: DemandField,
    params: ParamSet,
    m: int,
    profiles: DesignProfiles,
    b_cw,
    b_ccw,
    direction: str,
) -> float:
    """Unconstrained optimal headway for one direction (h).

    Balances vehicle-distance and vehicle-time costs against the waiting
    terms; headway-free, so it serves as the fixed-point update.
    """
    dx = field.corridor.dx
    mu = params.value_of_time
    pace = commercial_pace(profiles.spacing, profiles.stops_per_bay, m, params)
    num = params.cost_per_veh_km * field.corridor.length_km / mu + (
        params.cost_per_veh_h / mu
    ) * float(np.sum(pace) * dx)
    if direction == "cw":
        rate, pq = field.rate_cw, field.boarding_alighting_cw
        swing = np.asarray(b_cw) - np.asarray(b_ccw)
    else:
        rate, pq = field.rate_ccw, field.boarding_alighting_ccw
        swing = np.asarray(b_ccw) - np.asarray(b_cw)
    den = (2 * m - 1) * rate / 2.0 - float(
        np.sum((m - 1) * pq / (2.0 * profiles.stops_per_bay) + m * swing / 2.0) * dx
    )
    if den <= 0:
        raise ValueError("headway candidate is unbounded; demand is degenerate")
    return float(np.sqrt(num / den))


def _evaluate(field, scalars, profiles, b_cw, b_ccw, params) -> float:
    g = pointwise_integrand(
        field, scalars, params, profiles.spacing, profiles.stops_per_bay, b_cw, b_ccw
    )
    return scalar_terms(field, scalars, params) + float(np.sum(g) * field.corridor.dx)


def _outer_loop(field, params, m_cw, m_ccw, h_cw, h_ccw, lo_cw, lo_ccw, settings):
    """Headway/profile fixed point from one starting headway pair.

    Returns (h_cw, h_ccw, stage, converged, iterations, trace) or a string
    describing why the cell is infeasible.
    """
    trace = []
    converged = False
    stage = None
    iterations = 0
    for iterations in range(1, settings.max_outer_iterations + 1):
        scalars = DesignScalars(m_cw, m_ccw, h_cw, h_ccw)
        stage = stage1(field, scalars, params, settings)
        try:
            cand_cw = headway_candidate(
                field, params, m_cw, stage.profiles, stage.b_cw, stage.b_ccw, "cw"
            )
            cand_ccw = headway_candidate(
                field, params, m_ccw, stage.profiles, stage.b_cw, stage.b_ccw, "ccw"
            )
        except ValueError as exc:
            return str(exc)
        _, cap_cw = headway_window(
            field, params, m_cw, "cw", stage.profiles, stage.b_cw, stage.b_ccw
        )
        _, cap_ccw = headway_window(
            field, params, m_ccw, "ccw", stage.profiles, stage.b_cw, stage.b_ccw
        )
        # A transient iterate can push the backtracking add-on past the
        # capacity cap; the spacing clamp pulls it back on the next pass, so
        # ride through rather than abort. Feasibility is judged only at the
        # converged point, in _solve_cell.
        new_cw = float(np.clip(cand_cw, lo_cw, max(cap_cw, lo_cw)))
        new_ccw = float(np.clip(cand_ccw, lo_ccw, max(cap_ccw, lo_ccw)))
        residual = abs(h_cw - new_cw) + abs(h_ccw - new_ccw)
        h_cw, h_ccw = new_cw, new_ccw
        gc_now = _evaluate(
            field,
            DesignScalars(m_cw, m_ccw, h_cw, h_ccw),
            stage.profiles,
            stage.b_cw,
            stage.b_ccw,
            params,
        )
        trace.append((iterations, h_cw, h_ccw, residual, gc_now))
        if residual <= settings.tol_headway:
            converged = True
            break
    return h_cw, h_ccw, stage, converged, iterations, tuple(trace)


def _solve_cell(
    field: DemandField,
    params: ParamSet,
    m_cw: int,
    m_ccw: int,
    settings: SolverSettings,
) -> CellOutcome:
    lo_cw, hi_cw = headway_window(field, params, m_cw, "cw")
    lo_ccw, hi_ccw = headway_window(field, params, m_ccw, "ccw")
    if lo_cw > hi_cw or lo_ccw > hi_ccw:
        return CellOutcome(m_cw, m_ccw, "infeasible", "empty headway window")

    # The fixed point is not unique: short initial headways favor large-bay
    # profiles, long ones collapse to all-stop. Try both ends and keep the
    # cheaper basin.
    starts = [(lo_cw, lo_ccw), (0.5 * (lo_cw + hi_cw), 0.5 * (lo_ccw + hi_ccw))]
    runs = []
    reasons = []
    for h0_cw, h0_ccw in starts:
        run = _outer_loop(
            field, params, m_cw, m_ccw, h0_cw, h0_ccw, lo_cw, lo_ccw, settings
        )
        if isinstance(run, str):
            reasons.append(run)
        else:
            runs.append(run)
    if not runs:
        return CellOutcome(m_cw, m_ccw, "infeasible", "; ".join(sorted(set(reasons))))
    scored = [
        (
            generalized_cost(
                field,
                DesignScalars(m_cw, m_ccw, run[0], run[1]),
                run[2].profiles,
                params,
                cap_window=True,
            ),
            run,
        )
        for run in runs
    ]
    breakdown, best_run = min(scored, key=lambda pair: pair[0].total)
    h_cw, h_ccw, stage, converged, iterations, trace = best_run

    b_cw, b_ccw = backtrack_densities(
        field,
        stage.profiles.spacing,
        stage.profiles.stops_per_bay,
        m_cw,
        m_ccw,
        cap_window=True,
    )
    # Judge capacity at the converged design only: the window depends on the
    # backtracking densities, so mid-iteration violations are meaningless.
    _, cap_cw = headway_window(field, params, m_cw, "cw", stage.profiles, b_cw, b_ccw)
    _, cap_ccw = headway_window(field, params, m_ccw, "ccw", stage.profiles, b_cw, b_ccw)
    if lo_cw > cap_cw * (1 + 1e-6) or lo_ccw > cap_ccw * (1 + 1e-6):
        return CellOutcome(m_cw, m_ccw, "infeasible", "capacity below headway floor")
    clipped_cw = float(np.clip(h_cw, lo_cw, max(cap_cw, lo_cw)))
    clipped_ccw = float(np.clip(h_ccw, lo_ccw, max(cap_ccw, lo_ccw)))
    if clipped_cw != h_cw or clipped_ccw != h_ccw:
        h_cw, h_ccw = clipped_cw, clipped_ccw
        breakdown = generalized_cost(
            field,
            DesignScalars(m_cw, m_ccw, h_cw, h_ccw),
            stage.profiles,
            params,
            cap_window=True,
        )
    scalars = DesignScalars(m_cw, m_ccw, h_cw, h_ccw)
    binding = ""
    feasible = True
    slack = 1e-9
    if h_cw <= lo_cw + slack or h_ccw <= lo_ccw + slack:
        binding = "headway floor"
    if h_cw >= cap_cw * (1 - 1e-9) or h_ccw >= cap_ccw * (1 - 1e-9):
        binding = "capacity"
    if h_cw > cap_cw * (1 + 1e-6) or h_ccw > cap_ccw * (1 + 1e-6):
        feasible = False
    solution = Solution(
        scalars=scalars,
        profiles=stage.profiles,
        b_cw=b_cw,
        b_ccw=b_ccw,
        breakdown=breakdown,
        feasible=feasible,
        converged=converged and stage.converged,
        binding=binding,
        iterations=iterations,
        trace=trace,
    )
    if not feasible:
        return CellOutcome(m_cw, m_ccw, "infeasible", "capacity violated", solution)
    return CellOutcome(m_cw, m_ccw, "ok", "", solution)


def stage2_solve(
    field: DemandField,
    params: ParamSet,
    settings: SolverSettings = SolverSettings(),
    m_pairs=None,
) -> SolveResult:
    """Enumerate line-count pairs, solving the headway/profile fixed point
    in each, and return the generalized-cost minimizer with the full cell
    table."""
    if m_pairs is None:
        m_pairs = [
            (mc, mw)
            for mc in settings.line_candidates
            for mw in settings.line_candidates
        ]
    cells = []
    best = None
    for m_cw, m_ccw in m_pairs:
        outcome = _solve_cell(field, params, m_cw, m_ccw, settings)
        cells.append(outcome)
        if outcome.status == "ok" and (
            best is None or outcome.solution.gc < best.gc
        ):
            best = outcome.solution
    if best is None:
        return SolveResult(
            status="infeasible",
            best=None,
            cells=tuple(cells),
            reason="; ".join(
                f"m=({c.m_cw},{c.m_ccw}): {c.reason}" for c in cells
            ),
        )
    return SolveResult(status="ok", best=best, cells=tuple(cells))
