"""Continuous cost model for AB-type skip-stop service on a loop.

Generalized cost (GC, patron-hours per hour) adds user time components
(access, wait, in-vehicle, transfer penalties) to agency outlays divided by
the value of time: vehicle-distance, vehicle-time, line infrastructure and
stop infrastructure. All terms are integrals over the loop of closed-form
densities in the design variables:

  scalars   m_cw, m_ccw   number of interleaved skip-stop lines (1 = all-stop)
            headway_*     line headway per direction (h)
  profiles  spacing       stop spacing s(x) (km)
            stops_per_bay T(x) stops per skip-stop bay (T = 1: every stop
                          is served by all lines)

Internally everything is in hours and kilometres.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .demand import DemandField, backtrack_densities

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamSet:
    """Technology and cost parameters.

    Monetary rates are in $ per unit; value_of_time converts them to
    patron-hours. Times in hours, speeds km/h, capacity patrons per vehicle.
    backtrack_weight scales the extra riding time of backtracking patrons in
    the objective (1 = plain expected time).
    """

    walk_speed: float
    cruise_speed: float
    dwell_time: float
    capacity: float
    headway_min: float
    transfer_penalty: float
    value_of_time: float
    cost_per_veh_km: float
    cost_per_veh_h: float
    cost_per_line_km: float
    cost_per_stop_h: float
    backtrack_weight: float = 1.0

    def __post_init__(self):
        for name in (
            "walk_speed",
            "cruise_speed",
            "dwell_time",
            "capacity",
            "headway_min",
            "value_of_time",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.transfer_penalty < 0 or self.backtrack_weight < 0:
            raise ValueError("penalties and weights must be non-negative")


def bus_params(value_of_time: float, **overrides) -> ParamSet:
    """Bus technology costs; infrastructure and crew scale with wage level."""
    mu = value_of_time
    base = ParamSet(
        walk_speed=2.0,
        cruise_speed=25.0,
        dwell_time=30.0 / 3600.0,
        capacity=80.0,
        headway_min=1.0 / 60.0,
        transfer_penalty=1.0 / 60.0,
        value_of_time=mu,
        cost_per_veh_km=0.59,
        cost_per_veh_h=2.66 + 3.0 * mu,
        cost_per_line_km=6.0 + 0.2 * mu,
        cost_per_stop_h=0.42 + 0.014 * mu,
    )
    return replace(base, **overrides) if overrides else base


def rail_params(value_of_time: float, **overrides) -> ParamSet:
    """Rail technology costs; heavier infrastructure, faster and larger."""
    mu = value_of_time
    base = ParamSet(
        walk_speed=2.0,
        cruise_speed=60.0,
        dwell_time=45.0 / 3600.0,
        capacity=3000.0,
        headway_min=1.5 / 60.0,
        transfer_penalty=1.0 / 60.0,
        value_of_time=mu,
        cost_per_veh_km=2.20,
        cost_per_veh_h=101.0 + 5.0 * mu,
        cost_per_line_km=594.0 + 19.8 * mu,
        cost_per_stop_h=294.0 + 9.8 * mu,
    )
    return replace(base, **overrides) if overrides else base


_ALLOWED_LINES = (1, 2, 3, 4)


@dataclass(frozen=True)
class DesignScalars:
    """Line counts and headways (hours) per direction."""

    m_cw: int
    m_ccw: int
    headway_cw: float
    headway_ccw: float

    def __post_init__(self):
        if self.m_cw not in _ALLOWED_LINES or self.m_ccw not in _ALLOWED_LINES:
            raise ValueError("line counts must be in 1..4")
        if not (self.headway_cw > 0 and self.headway_ccw > 0):
            raise ValueError("headways must be positive")


@dataclass(frozen=True)
class DesignProfiles:
    """Stop spacing (km) and stops-per-bay profiles on the demand grid.

    stops_per_bay is kept continuous here; integrality only matters once a
    discrete stop plan is built.
    """

    spacing: np.ndarray
    stops_per_bay: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.spacing, dtype=float))
        t = np.ascontiguousarray(np.asarray(self.stops_per_bay, dtype=float))
        if s.shape != t.shape:
            raise ValueError("spacing and stops_per_bay must have equal shapes")
        if np.any(s <= 0):
            raise ValueError("spacing must be positive")
        if np.any(t < 1):
            raise ValueError("stops_per_bay must be >= 1")
        s.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "spacing", s)
        object.__setattr__(self, "stops_per_bay", t)


@dataclass(frozen=True)
class CostBreakdown:
    """GC components in patron-hours per hour of operation."""

    access: float
    wait: float
    in_vehicle: float
    transfer: float
    op_distance: float
    op_time: float
    infra_line: float
    infra_stop: float

    @property
    def user_total(self) -> float:
        return self.access + self.wait + self.in_vehicle + self.transfer

    @property
    def agency_total(self) -> float:
        return self.op_distance + self.op_time + self.infra_line + self.infra_stop

    @property
    def total(self) -> float:
        return self.user_total + self.agency_total

    def as_dict(self) -> dict:
        return {
            "access": self.access,
            "wait": self.wait,
            "in_vehicle": self.in_vehicle,
            "transfer": self.transfer,
            "op_distance": self.op_distance,
            "op_time": self.op_time,
            "infra_line": self.infra_line,
            "infra_stop": self.infra_stop,
            "user_total": self.user_total,
            "agency_total": self.agency_total,
            "total": self.total,
        }


def commercial_pace(spacing, stops_per_bay, m: int, params: ParamSet):
    """Inverse commercial speed (h/km) of a line.

    Each line stops at the T-th stops plus its 1-in-m share of the rest, so
    dwell per km is tau ((T-1)/m + 1) / (T s).
    """
    s = np.asarray(spacing, dtype=float)
    t = np.asarray(stops_per_bay, dtype=float)
    return 1.0 / params.cruise_speed + params.dwell_time * ((t - 1.0) / m + 1.0) / (t * s)


def trip_type_wait_table(scalars: DesignScalars) -> dict:
    """Expected waits (h) by boarding/alighting stop class, per direction.

    Classes: 1 both stops common to all lines; 2/3 exactly one stop
    line-specific; 4 both on the same bay but different lines (backtrack via
    the opposite direction); 5 different bays on different lines (transfer).
    """
    both = 0.5 * (
        scalars.m_cw * scalars.headway_cw + scalars.m_ccw * scalars.headway_ccw
    )
    out = {}
    for key, m, h in (
        ("cw", scalars.m_cw, scalars.headway_cw),
        ("ccw", scalars.m_ccw, scalars.headway_ccw),
    ):
        out[key] = (h / 2.0, m * h / 2.0, m * h / 2.0, both, m * h)
    return out


def access_cost(field: DemandField, profiles: DesignProfiles, params: ParamSet) -> float:
    """Walk time to and from stops; mean walk is a quarter spacing."""
    dx = field.corridor.dx
    pq = field.boarding_alighting_cw + field.boarding_alighting_ccw
    return float(np.sum(pq * profiles.spacing / (4.0 * params.walk_speed)) * dx)


def wait_cost(
    field: DemandField,
    scalars: DesignScalars,
    profiles: DesignProfiles,
    b_cw: np.ndarray,
    b_ccw: np.ndarray,
    params: ParamSet,
) -> float:
    """Expected platform wait, aggregated over the five trip classes.

    Headway-based base terms per direction, minus credits for trips touching
    all-line stops, plus the headway asymmetry felt by backtracking trips.
    """
    dx = field.corridor.dx
    t = profiles.stops_per_bay
    base = (
        (2 * scalars.m_cw - 1) * scalars.headway_cw * field.rate_cw / 2.0
        + (2 * scalars.m_ccw - 1) * scalars.headway_ccw * field.rate_ccw / 2.0
    )
    credits = (
        (scalars.m_cw - 1) * scalars.headway_cw * field.boarding_alighting_cw
        + (scalars.m_ccw - 1) * scalars.headway_ccw * field.boarding_alighting_ccw
    ) / (2.0 * t)
    swing = (
        scalars.m_ccw * scalars.headway_ccw - scalars.m_cw * scalars.headway_cw
    ) / 2.0
    return float(base + np.sum((-credits + swing * (b_cw - b_ccw))) * dx)


def invehicle_cost(
    field: DemandField,
    scalars: DesignScalars,
    profiles: DesignProfiles,
    b_cw: np.ndarray,
    b_ccw: np.ndarray,
    params: ParamSet,
) -> float:
    """Riding time of through flow plus the detour of backtracking trips."""
    dx = field.corridor.dx
    s = profiles.spacing
    t = profiles.stops_per_bay
    pace_cw = commercial_pace(s, t, scalars.m_cw, params)
    pace_ccw = commercial_pace(s, t, scalars.m_ccw, params)
    detour = t * s / (3.0 * params.cruise_speed) + (params.dwell_time / 6.0) * (
        (t - 1.0) / scalars.m_cw + (t - 1.0) / scalars.m_ccw + 2.0
    )
    ride = field.flow_cw * pace_cw + field.flow_ccw * pace_ccw
    extra = params.backtrack_weight * (b_cw + b_ccw) * detour
    return float(np.sum(ride + extra) * dx)


def transfer_cost(
    field: DemandField,
    scalars: DesignScalars,
    profiles: DesignProfiles,
    params: ParamSet,
) -> float:
    """Transfer penalties, counted conservatively.

    Upper-bounds the chance that a trip needs a line change by pairing each
    end's chance of being on a line-specific stop; exact for T = 1 or m = 1.
    """
    t = profiles.stops_per_bay
    dx = field.corridor.dx
    e_cw = (scalars.m_cw - 1) / scalars.m_cw
    e_ccw = (scalars.m_ccw - 1) / scalars.m_ccw
    base = e_cw * field.rate_cw + e_ccw * field.rate_ccw
    credit = np.sum(
        (e_cw * field.boarding_alighting_cw + e_ccw * field.boarding_alighting_ccw)
        * (2.0 * t - 1.0)
        / (2.0 * t**2)
    ) * dx
    value = params.transfer_penalty * (base - credit)
    if value < 0:
        if value < -1e-6 * max(1.0, abs(params.transfer_penalty * base)):
            log.warning("transfer cost clamped from %.3e to 0", value)
        value = 0.0
    return float(value)


def agency_costs(
    field: DemandField,
    scalars: DesignScalars,
    profiles: DesignProfiles,
    params: ParamSet,
) -> tuple[float, float, float, float]:
    """(vehicle-distance, vehicle-time, line infra, stop infra) in h/h."""
    length = field.corridor.length_km
    dx = field.corridor.dx
    mu = params.value_of_time
    inv_h = 1.0 / scalars.headway_cw + 1.0 / scalars.headway_ccw
    op_distance = params.cost_per_veh_km * length / mu * inv_h
    pace_cw = commercial_pace(profiles.spacing, profiles.stops_per_bay, scalars.m_cw, params)
    pace_ccw = commercial_pace(profiles.spacing, profiles.stops_per_bay, scalars.m_ccw, params)
    op_time = (
        params.cost_per_veh_h
        / mu
        * float(
            np.sum(pace_cw / scalars.headway_cw + pace_ccw / scalars.headway_ccw) * dx
        )
    )
    infra_line = 2.0 * params.cost_per_line_km * length / mu
    infra_stop = params.cost_per_stop_h / mu * float(np.sum(1.0 / profiles.spacing) * dx)
    return op_distance, op_time, infra_line, infra_stop


def scalar_terms(field: DemandField, scalars: DesignScalars, params: ParamSet) -> float:
    """Profile-independent part of GC: base waits, base transfer penalties,
    vehicle-distance cost and line infrastructure."""
    mu = params.value_of_time
    length = field.corridor.length_km
    return float(
        (2 * scalars.m_cw - 1) * scalars.headway_cw * field.rate_cw / 2.0
        + (2 * scalars.m_ccw - 1) * scalars.headway_ccw * field.rate_ccw / 2.0
        + params.transfer_penalty
        * (
            (scalars.m_cw - 1) / scalars.m_cw * field.rate_cw
            + (scalars.m_ccw - 1) / scalars.m_ccw * field.rate_ccw
        )
        + params.cost_per_veh_km
        * length
        / mu
        * (1.0 / scalars.headway_cw + 1.0 / scalars.headway_ccw)
        + 2.0 * params.cost_per_line_km * length / mu
    )


def pointwise_integrand(
    field: DemandField,
    scalars: DesignScalars,
    params: ParamSet,
    spacing,
    stops_per_bay,
    b_cw,
    b_ccw,
):
    """GC density G(x) (h/h per km) such that GC = scalar_terms + sum G dx.

    Linear in s and 1/s for fixed T and b, with non-negative s and 1/s
    coefficients. Broadcasts over leading axes of the design arrays.
    """
    s = np.asarray(spacing, dtype=float)
    t = np.asarray(stops_per_bay, dtype=float)
    b_cw = np.asarray(b_cw, dtype=float)
    b_ccw = np.asarray(b_ccw, dtype=float)
    mu = params.value_of_time
    pq_cw = field.boarding_alighting_cw
    pq_ccw = field.boarding_alighting_ccw

    access = (pq_cw + pq_ccw) * s / (4.0 * params.walk_speed)
    credits = (
        (scalars.m_cw - 1) * scalars.headway_cw * pq_cw
        + (scalars.m_ccw - 1) * scalars.headway_ccw * pq_ccw
    ) / (2.0 * t)
    swing = (
        scalars.m_ccw * scalars.headway_ccw - scalars.m_cw * scalars.headway_cw
    ) / 2.0
    pace_cw = commercial_pace(s, t, scalars.m_cw, params)
    pace_ccw = commercial_pace(s, t, scalars.m_ccw, params)
    detour = t * s / (3.0 * params.cruise_speed) + (params.dwell_time / 6.0) * (
        (t - 1.0) / scalars.m_cw + (t - 1.0) / scalars.m_ccw + 2.0
    )
    transfer_credit = (
        params.transfer_penalty
        * (
            (scalars.m_cw - 1) / scalars.m_cw * pq_cw
            + (scalars.m_ccw - 1) / scalars.m_ccw * pq_ccw
        )
        * (2.0 * t - 1.0)
        / (2.0 * t**2)
    )
    return (
        access
        - credits
        + swing * (b_cw - b_ccw)
        + field.flow_cw * pace_cw
        + field.flow_ccw * pace_ccw
        + params.backtrack_weight * (b_cw + b_ccw) * detour
        - transfer_credit
        + params.cost_per_veh_h
        / mu
        * (pace_cw / scalars.headway_cw + pace_ccw / scalars.headway_ccw)
        + params.cost_per_stop_h / (mu * s)
    )


def generalized_cost(
    field: DemandField,
    scalars: DesignScalars,
    profiles: DesignProfiles,
    params: ParamSet,
    *,
    cap_window: bool = False,
) -> CostBreakdown:
    """Full GC breakdown at a design; backtracking densities are recomputed
    from the profiles."""
    b_cw, b_ccw = backtrack_densities(
        field,
        profiles.spacing,
        profiles.stops_per_bay,
        scalars.m_cw,
        scalars.m_ccw,
        cap_window=cap_window,
    )
    op_distance, op_time, infra_line, infra_stop = agency_costs(
        field, scalars, profiles, params
    )
    return CostBreakdown(
        access=access_cost(field, profiles, params),
        wait=wait_cost(field, scalars, profiles, b_cw, b_ccw, params),
        in_vehicle=invehicle_cost(field, scalars, profiles, b_cw, b_ccw, params),
        transfer=transfer_cost(field, scalars, profiles, params),
        op_distance=op_distance,
        op_time=op_time,
        infra_line=infra_line,
        infra_stop=infra_stop,
    )
