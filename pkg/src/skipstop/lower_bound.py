"""Certified lower bound on the optimal generalized cost.

Dropping the (non-negative) backtracking terms and enlarging every
transfer/wait credit to its T -> infinity or T = 1 envelope leaves, at each
point, a function  f(x, s) + beta(x, s) / T  whose minimum over T >= 1 is
attained at one of the two ends: T -> infinity (value f) when beta >= 0,
else T = 1 (value f + beta). Both envelopes have the form
a s + c / s + d, minimized in closed form. The remaining scalars (m pair and
the two headways) are enumerated exhaustively, headways on a fine grid, with
an analytical bound used to prune dominated grid rows and columns exactly.

For demand fields that are transpose- or reflection-symmetric the dropped
wait-swing term nets out at symmetric designs, which is what makes the bound
a certificate there; the result carries a flag so asymmetric inputs can be
labeled indicative.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .costs import DesignScalars, ParamSet
from .demand import DemandField

log = logging.getLogger(__name__)

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(fn, lo: float, hi: float, tol: float = 1e-9, max_expand: int = 60):
    """Minimize a unimodal scalar function by golden-section search.

    The upper end expands (doubling) until the minimum is bracketed, so a
    too-small initial interval cannot clip the argmin.
    """
    for _ in range(max_expand):
        if fn(hi) > fn(0.999 * hi):
            break
        hi *= 2.0
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


@dataclass(frozen=True)
class LBComponents:
    """Pointwise envelope coefficients at fixed scalars.

    f(s) = slope s + dwell_split / s + flat          (T -> infinity envelope)
    f(s) + beta(s) = slope s + dwell_all / s + flat - credit   (T = 1)
    """

    theta: float
    slope: np.ndarray
    dwell_split: np.ndarray
    dwell_all: np.ndarray
    flat: np.ndarray
    credit: np.ndarray

    def f(self, s, j=None):
        a, c, d = self.slope, self.dwell_split, self.flat
        if j is not None:
            a, c, d = a[j], c[j], d[j]
        return a * np.asarray(s) + c / np.asarray(s) + d

    def beta(self, s, j=None):
        c_gap = self.dwell_all - self.dwell_split
        cr = self.credit
        if j is not None:
            c_gap, cr = c_gap[j], cr[j]
        return c_gap / np.asarray(s) - cr


def lb_components(
    field: DemandField, scalars: DesignScalars, params: ParamSet
) -> LBComponents:
    """Assemble the scalar term and the pointwise envelope coefficients."""
    mu = params.value_of_time
    tau = params.dwell_time
    v = params.cruise_speed
    length = field.corridor.length_km
    e_cw = (scalars.m_cw - 1) / scalars.m_cw
    e_ccw = (scalars.m_ccw - 1) / scalars.m_ccw
    u_cw = params.cost_per_veh_h / (mu * scalars.headway_cw)
    u_ccw = params.cost_per_veh_h / (mu * scalars.headway_ccw)

    theta = (
        (2 * scalars.m_cw - 1) * scalars.headway_cw * field.rate_cw / 2.0
        + (2 * scalars.m_ccw - 1) * scalars.headway_ccw * field.rate_ccw / 2.0
        + params.transfer_penalty * (e_cw * field.rate_cw + e_ccw * field.rate_ccw)
        + params.cost_per_veh_km
        * length
        / mu
        * (1.0 / scalars.headway_cw + 1.0 / scalars.headway_ccw)
        + 2.0 * params.cost_per_line_km * length / mu
    )
    slope = (field.boarding_alighting_cw + field.boarding_alighting_ccw) / (
        4.0 * params.walk_speed
    )
    ride_cw = field.flow_cw + u_cw
    ride_ccw = field.flow_ccw + u_ccw
    dwell_split = (
        tau * (ride_cw / scalars.m_cw + ride_ccw / scalars.m_ccw)
        + params.cost_per_stop_h / mu
    )
    dwell_all = tau * (ride_cw + ride_ccw) + params.cost_per_stop_h / mu
    flat = (ride_cw + ride_ccw) / v
    credit = (
        e_cw * params.transfer_penalty + (scalars.m_cw - 1) * scalars.headway_cw / 2.0
    ) * field.boarding_alighting_cw + (
        e_ccw * params.transfer_penalty + (scalars.m_ccw - 1) * scalars.headway_ccw / 2.0
    ) * field.boarding_alighting_ccw
    return LBComponents(
        theta=float(theta),
        slope=slope,
        dwell_split=dwell_split,
        dwell_all=dwell_all,
        flat=flat,
        credit=credit,
    )


def lb_inner_minimize(
    comp: LBComponents, j: int, s_lo: float = 1e-3, s_hi: float = 5.0
) -> tuple[float, str, float]:
    """Pointwise envelope minimum by golden-section search on each branch.

    Returns (value, branch, argmin spacing); branch is "all_stop" when the
    T = 1 end wins and "wide_bay" for T -> infinity.
    """
    s_inf, v_inf = golden_section_min(lambda s: comp.f(s, j), s_lo, s_hi)
    s_one, v_one = golden_section_min(
        lambda s: comp.f(s, j) + comp.beta(s, j), s_lo, s_hi
    )
    if v_one <= v_inf:
        return float(v_one), "all_stop", float(s_one)
    return float(v_inf), "wide_bay", float(s_inf)


def _branch_values(slope, dwell, flat):
    """Closed-form min of slope*s + dwell/s + flat over s > 0."""
    return 2.0 * np.sqrt(slope * dwell) + flat


@dataclass(frozen=True)
class LowerBoundResult:
    status: str  # "ok" | "infeasible"
    gc_lb: float
    m_cw: int
    m_ccw: int
    headway_cw: float
    headway_ccw: float
    branch_all_stop: np.ndarray
    spacing: np.ndarray
    symmetric: bool
    h_step: float
    skipped: tuple
    reason: str = ""


def demand_is_symmetric(field: DemandField, rtol: float = 1e-8) -> bool:
    """Transpose or reflection symmetry; either nets the wait-swing term out."""
    lam = field.lam
    scale = float(np.max(lam)) or 1.0
    return bool(
        np.allclose(lam, lam.T, rtol=rtol, atol=rtol * scale)
        or np.allclose(lam, lam[::-1, ::-1], rtol=rtol, atol=rtol * scale)
    )


def removed_backtrack_terms(field, scalars, b_cw, b_ccw, params: ParamSet, profiles) -> float:
    """Objective content the bound drops, evaluated at a design; must be
    non-negative for the certificate to hold there."""
    dx = field.corridor.dx
    t = profiles.stops_per_bay
    s = profiles.spacing
    swing = (
        scalars.m_ccw * scalars.headway_ccw - scalars.m_cw * scalars.headway_cw
    ) / 2.0
    detour = t * s / (3.0 * params.cruise_speed) + (params.dwell_time / 6.0) * (
        (t - 1.0) / scalars.m_cw + (t - 1.0) / scalars.m_ccw + 2.0
    )
    total = np.sum(
        swing * (np.asarray(b_cw) - np.asarray(b_ccw))
        + params.backtrack_weight * (np.asarray(b_cw) + np.asarray(b_ccw)) * detour
    )
    return float(total * dx)


def _pair_bound_constant(field: DemandField, params: ParamSet, m_cw: int, m_ccw: int):
    """Headway-independent part of the pruning bound for one m pair.

    Drops every positive 1/H contribution inside the envelopes and charges
    the headway-linear credits at their worst (total boardings+alightings
    integrate to twice the directional rate), which leaves rate*H/2 per
    direction outside this constant.
    """
    mu = params.value_of_time
    tau = params.dwell_time
    dx = field.corridor.dx
    e_cw = (m_cw - 1) / m_cw
    e_ccw = (m_ccw - 1) / m_ccw
    slope = (field.boarding_alighting_cw + field.boarding_alighting_ccw) / (
        4.0 * params.walk_speed
    )
    dwell_split0 = (
        tau * (field.flow_cw / m_cw + field.flow_ccw / m_ccw) + params.cost_per_stop_h / mu
    )
    dwell_all0 = tau * (field.flow_cw + field.flow_ccw) + params.cost_per_stop_h / mu
    flat0 = (field.flow_cw + field.flow_ccw) / params.cruise_speed
    credit0 = params.transfer_penalty * (
        e_cw * field.boarding_alighting_cw + e_ccw * field.boarding_alighting_ccw
    )
    val = np.minimum(
        _branch_values(slope, dwell_split0, flat0),
        _branch_values(slope, dwell_all0, flat0) - credit0,
    )
    const = (
        params.transfer_penalty * (e_cw * field.rate_cw + e_ccw * field.rate_ccw)
        + 2.0 * params.cost_per_line_km * field.corridor.length_km / mu
        + float(np.sum(val) * dx)
    )
    return const


def lb_solve(
    field: DemandField,
    params: ParamSet,
    *,
    h_step: float = 0.1 / 60.0,
    m_candidates=(1, 2, 3, 4),
) -> LowerBoundResult:
    """Exhaustive scalar enumeration of the pointwise-minimized envelope.

    Headways run over [floor, capacity] in h_step increments per direction
    and line-count pairs over m_candidates x m_candidates. Dominated rows
    and columns are skipped using an exact analytical bound; the reported
    minimum equals the unpruned enumeration's.
    """
    mu = params.value_of_time
    dx = field.corridor.dx
    length = field.corridor.length_km
    km_term = params.cost_per_veh_km * length / mu
    tau = params.dwell_time
    v = params.cruise_speed

    best = np.inf
    best_at = None
    skipped = []
    for m_cw in m_candidates:
        for m_ccw in m_candidates:
            lo_cw = params.headway_min + (tau if m_cw > 1 else 0.0)
            lo_ccw = params.headway_min + (tau if m_ccw > 1 else 0.0)
            hi_cw = params.capacity / float(np.max(field.flow_cw))
            hi_ccw = params.capacity / float(np.max(field.flow_ccw))
            if lo_cw > hi_cw or lo_ccw > hi_ccw:
                skipped.append((m_cw, m_ccw))
                continue
            h_cw_grid = np.arange(lo_cw, hi_cw + h_step / 2, h_step)
            h_ccw_grid = np.arange(lo_ccw, hi_ccw + h_step / 2, h_step)
            # keep the exact capacity endpoint: capacity-clamped optima sit
            # there, and a grid that stops short overstates the bound
            if hi_cw - h_cw_grid[-1] > 1e-12:
                h_cw_grid = np.append(h_cw_grid, hi_cw)
            if hi_ccw - h_ccw_grid[-1] > 1e-12:
                h_ccw_grid = np.append(h_ccw_grid, hi_ccw)

            const = _pair_bound_constant(field, params, m_cw, m_ccw)
            row_part = field.rate_cw * h_cw_grid / 2.0 + km_term / h_cw_grid
            col_part = field.rate_ccw * h_ccw_grid / 2.0 + km_term / h_ccw_grid
            row_bound = row_part + const + 2.0 * np.sqrt(
                field.rate_ccw / 2.0 * km_term
            )

            e_cw = (m_cw - 1) / m_cw
            e_ccw = (m_ccw - 1) / m_ccw
            slope = (
                field.boarding_alighting_cw + field.boarding_alighting_ccw
            ) / (4.0 * params.walk_speed)
            order = np.argsort(row_bound)
            for r in order:
                if row_bound[r] >= best:
                    continue
                h_cw = h_cw_grid[r]
                keep = row_part[r] + col_part + const < best
                if not np.any(keep):
                    continue
                h_ccw = h_ccw_grid[keep]
                u_cw = params.cost_per_veh_h / (mu * h_cw)
                u_ccw = params.cost_per_veh_h / (mu * h_ccw)
                ride_cw = field.flow_cw + u_cw
                ride_ccw = field.flow_ccw[None, :] + u_ccw[:, None]
                dwell_split = (
                    tau * (ride_cw[None, :] / m_cw + ride_ccw / m_ccw)
                    + params.cost_per_stop_h / mu
                )
                dwell_all = tau * (ride_cw[None, :] + ride_ccw) + params.cost_per_stop_h / mu
                flat = (ride_cw[None, :] + ride_ccw) / v
                credit = (
                    e_cw * params.transfer_penalty + (m_cw - 1) * h_cw / 2.0
                ) * field.boarding_alighting_cw[None, :] + (
                    e_ccw * params.transfer_penalty
                    + (m_ccw - 1) * h_ccw[:, None] / 2.0
                ) * field.boarding_alighting_ccw[None, :]
                val = np.minimum(
                    _branch_values(slope[None, :], dwell_split, flat),
                    _branch_values(slope[None, :], dwell_all, flat) - credit,
                )
                theta = (
                    (2 * m_cw - 1) * h_cw * field.rate_cw / 2.0
                    + (2 * m_ccw - 1) * h_ccw * field.rate_ccw / 2.0
                    + params.transfer_penalty
                    * (e_cw * field.rate_cw + e_ccw * field.rate_ccw)
                    + km_term * (1.0 / h_cw + 1.0 / h_ccw)
                    + 2.0 * params.cost_per_line_km * length / mu
                )
                obj = theta + val.sum(axis=1) * dx
                i = int(np.argmin(obj))
                if obj[i] < best:
                    best = float(obj[i])
                    best_at = (m_cw, m_ccw, float(h_cw), float(h_ccw[i]))

    if best_at is None:
        return LowerBoundResult(
            status="infeasible",
            gc_lb=np.nan,
            m_cw=0,
            m_ccw=0,
            headway_cw=np.nan,
            headway_ccw=np.nan,
            branch_all_stop=np.zeros(0, dtype=bool),
            spacing=np.zeros(0),
            symmetric=demand_is_symmetric(field),
            h_step=h_step,
            skipped=tuple(skipped),
            reason="empty headway window for every line-count pair",
        )

    m_cw, m_ccw, h_cw, h_ccw = best_at
    comp = lb_components(field, DesignScalars(m_cw, m_ccw, h_cw, h_ccw), params)
    with np.errstate(divide="ignore", invalid="ignore"):
        v_inf = _branch_values(comp.slope, comp.dwell_split, comp.flat)
        v_one = _branch_values(comp.slope, comp.dwell_all, comp.flat) - comp.credit
        branch_all_stop = v_one <= v_inf
        spacing = np.where(
            branch_all_stop,
            np.sqrt(comp.dwell_all / np.maximum(comp.slope, 1e-300)),
            np.sqrt(comp.dwell_split / np.maximum(comp.slope, 1e-300)),
        )
    return LowerBoundResult(
        status="ok",
        gc_lb=best,
        m_cw=m_cw,
        m_ccw=m_ccw,
        headway_cw=h_cw,
        headway_ccw=h_ccw,
        branch_all_stop=branch_all_stop,
        spacing=spacing,
        symmetric=demand_is_symmetric(field),
        h_step=h_step,
        skipped=tuple(skipped),
    )
