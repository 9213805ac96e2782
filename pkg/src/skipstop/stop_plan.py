"""Conversion of continuous design profiles into a discrete stop plan.

The spacing and bay-size profiles live on grid knots; monotone-safe periodic
interpolants turn them into curves. Stops are placed where the running
integral of 1/s crosses whole numbers (one stop per spacing), transfer stops
are selected by a forward recursion that keeps each bay close to one unit of
the running integral of 1/(s*T) (one bay per local bay length) while giving
every line an equal share of skipped stops, and the remaining stops are dealt
cyclically to lines per direction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .costs import DesignProfiles
from .demand import Corridor

log = logging.getLogger(__name__)

_SUBDIV = 50  # sub-grid steps per demand cell for the placement integrals
_PAD = 4  # knots wrapped on each side so the interpolant is periodic in effect


def _periodic_pchip(knots_x: np.ndarray, values: np.ndarray, period: float):
    x = np.concatenate([knots_x[-_PAD:] - period, knots_x, knots_x[:_PAD] + period])
    y = np.concatenate([values[-_PAD:], values, values[:_PAD]])
    return PchipInterpolator(x, y, extrapolate=True)


@dataclass(frozen=True)
class ProfileFit:
    """Periodic interpolants of the design profiles plus their running
    integrals on a fine sub-grid (used for stop placement and bay sizing)."""

    corridor: Corridor
    spacing_fn: object
    bays_fn: object
    edges: np.ndarray  # sub-grid edge coordinates, 0..L
    cum_inv_spacing: np.ndarray  # integral of 1/s from 0 to each edge
    cum_bays: np.ndarray  # integral of T from 0 to each edge
    cum_inv_bay: np.ndarray  # integral of 1/(s*T) from 0 to each edge

    def spacing(self, x):
        return np.maximum(self.spacing_fn(np.asarray(x) % self.corridor.length_km), 1e-9)

    def stops_per_bay(self, x):
        return np.maximum(self.bays_fn(np.asarray(x) % self.corridor.length_km), 1.0)

    def stop_count_between(self, a: float, b: float) -> float:
        """Integral of 1/s over [a, b] within one period, a <= b."""
        return float(np.interp(b, self.edges, self.cum_inv_spacing)) - float(
            np.interp(a, self.edges, self.cum_inv_spacing)
        )

    def mean_bays_between(self, a: float, b: float) -> float:
        """Average fitted bay size over [a, b], a < b."""
        lo = float(np.interp(a, self.edges, self.cum_bays))
        hi = float(np.interp(b, self.edges, self.cum_bays))
        return (hi - lo) / (b - a)

    def bay_count_between(self, a: float, b: float) -> float:
        """Integral of 1/(s*T) over [a, b] within one period, a <= b.

        One unit of this integral spans one local bay, the same way one unit
        of the 1/s integral spans one stop gap."""
        return float(np.interp(b, self.edges, self.cum_inv_bay)) - float(
            np.interp(a, self.edges, self.cum_inv_bay)
        )


def fit_profiles(corridor: Corridor, profiles: DesignProfiles) -> ProfileFit:
    """Fit periodic monotone-safe curves through the profile knots.

    Shape-preserving interpolation cannot overshoot, so positive spacing
    knots give a positive curve; a linear fallback guards the degenerate
    case anyway.
    """
    x = corridor.centers
    s_fn = _periodic_pchip(x, profiles.spacing, corridor.length_km)
    t_fn = _periodic_pchip(x, profiles.stops_per_bay, corridor.length_km)

    m = corridor.cells * _SUBDIV
    edges = np.linspace(0.0, corridor.length_km, m + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    h = corridor.length_km / m
    s_mid = np.asarray(s_fn(mids))
    if np.any(s_mid <= 0):
        log.warning("interpolated spacing dipped non-positive; using linear fit")
        s_fn = lambda q: np.interp(
            np.asarray(q) % corridor.length_km,
            np.concatenate([x, [x[0] + corridor.length_km]]),
            np.concatenate([profiles.spacing, [profiles.spacing[0]]]),
        )
        s_mid = np.asarray(s_fn(mids))
    t_mid = np.maximum(np.asarray(t_fn(mids)), 1.0)
    cum_inv = np.concatenate([[0.0], np.cumsum(h / s_mid)])
    cum_t = np.concatenate([[0.0], np.cumsum(h * t_mid)])
    cum_inv_bay = np.concatenate([[0.0], np.cumsum(h / (s_mid * t_mid))])
    return ProfileFit(
        corridor=corridor,
        spacing_fn=s_fn,
        bays_fn=t_fn,
        edges=edges,
        cum_inv_spacing=cum_inv,
        cum_bays=cum_t,
        cum_inv_bay=cum_inv_bay,
    )


def place_stops(fit: ProfileFit) -> np.ndarray:
    """Stop locations: x = 0 plus each whole-number crossing of the running
    1/s integral. A trailing stop closer to the wrap than half a spacing is
    dropped (it would crowd the stop at 0)."""
    cum = fit.cum_inv_spacing
    total = cum[-1]
    count = int(math.floor(total - 1e-9))
    targets = np.arange(1, count + 1, dtype=float)
    right = np.searchsorted(cum, targets)
    left = right - 1
    frac = (targets - cum[left]) / (cum[right] - cum[left])
    xs = fit.edges[left] + frac * (fit.edges[right] - fit.edges[left])
    positions = np.concatenate([[0.0], xs])
    length = fit.corridor.length_km
    if positions.size > 1:
        wrap_gap = length - positions[-1]
        if wrap_gap < float(fit.spacing(0.0)) / 2.0:
            positions = positions[:-1]
    return positions


def select_transfer_stops(
    fit: ProfileFit, positions: np.ndarray, m_cw: int, m_ccw: int
) -> np.ndarray:
    """Indices of all-line (transfer) stops.

    Starting from stop 0, each next transfer stop makes the accumulated
    1/(s*T) integral of the bay as close to one as possible, among candidates
    leaving a multiple of lcm(m_cw, m_ccw) skipped stops; ties go to the
    nearer stop. Accumulating 1/(s*T) rather than comparing the stop count
    against an average T makes bays break quickly wherever the bay-size
    profile drops, so all-stop zones are not buried mid-bay. The recursion
    necessarily ends on the last stop; trailing transfer stops too close to
    the wrap are then unwound.
    """
    n = positions.size
    block = math.lcm(m_cw, m_ccw)
    picks = [0]
    while picks[-1] < n - 1:
        uk = picks[-1]
        best_u = None
        best_obj = np.inf
        u = uk + 1
        while u <= n - 1:
            filled = fit.bay_count_between(positions[uk], positions[u])
            obj = abs(filled - 1.0)
            if obj < best_obj - 1e-12:
                best_obj = obj
                best_u = u
            elif filled - 1.0 > best_obj:
                break  # the integral only accumulates from here
            u += block
        picks.append(best_u)

    # Unwind trailing transfer stops whose wrap-around bay would be under
    # half a bay integral (the stop at 0 already anchors that bay).
    length = fit.corridor.length_km
    while len(picks) > 1:
        x_last = positions[picks[-1]]
        if fit.bay_count_between(x_last, length) < 0.5:
            picks.pop()
        else:
            break
    return np.asarray(picks, dtype=int)


def assign_lines(
    positions: np.ndarray, transfer_idx: np.ndarray, m_cw: int, m_ccw: int
) -> tuple[np.ndarray, np.ndarray]:
    """Deal non-transfer stops to lines cyclically within each bay.

    Numbering restarts at every transfer stop, so a bay with q * lcm skipped
    stops gives each line exactly its share. The starting line rotates by one
    per bay, so over consecutive bays every line takes the lead slot equally
    often — with a fixed start, origin and destination line labels correlate
    through the bay pattern and trips pile onto (or dodge) the same-line case.
    Transfer stops get -1 (all lines). Both directions cycle in
    increasing-position order; labels are arbitrary."""
    n = positions.size
    is_transfer = np.zeros(n, dtype=bool)
    is_transfer[transfer_idx] = True
    lines = []
    for m in (m_cw, m_ccw):
        assignment = np.full(n, -1, dtype=int)
        counter = 0
        bay = -1
        for idx in range(n):
            if is_transfer[idx]:
                bay += 1
                counter = bay % m
            else:
                assignment[idx] = counter % m
                counter += 1
        lines.append(assignment)
    return lines[0], lines[1]


@dataclass(frozen=True)
class StopPlan:
    """Discrete stop layout: positions (km, ascending, first at 0),
    transfer flags, and per-direction line assignment (-1 = all lines)."""

    corridor: Corridor
    m_cw: int
    m_ccw: int
    positions: np.ndarray
    is_transfer: np.ndarray
    line_cw: np.ndarray
    line_ccw: np.ndarray

    @property
    def n_stops(self) -> int:
        return int(self.positions.size)

    @property
    def transfer_indices(self) -> np.ndarray:
        return np.flatnonzero(self.is_transfer)

    def serves(self, stop: int, line: int, direction: str) -> bool:
        lines = self.line_cw if direction == "cw" else self.line_ccw
        return bool(self.is_transfer[stop] or lines[stop] == line)

    def stops_on_line(self, line: int, direction: str) -> np.ndarray:
        lines = self.line_cw if direction == "cw" else self.line_ccw
        return np.flatnonzero(self.is_transfer | (lines == line))

    def realized_spacings(self) -> np.ndarray:
        """Gap after each stop, wrapping at the loop end."""
        nxt = np.roll(self.positions, -1)
        nxt[-1] += self.corridor.length_km
        return nxt - self.positions

    def realized_bays(self) -> np.ndarray:
        """Stop gaps between consecutive transfer stops, wrap included."""
        t = self.transfer_indices
        if t.size == 0:
            return np.zeros(0)
        nxt = np.roll(t, -1).astype(float)
        nxt[-1] += self.n_stops
        return nxt - t

    def to_rows(self) -> list:
        rows = []
        for i in range(self.n_stops):
            rows.append(
                {
                    "stop": i,
                    "x_km": float(self.positions[i]),
                    "is_transfer": int(self.is_transfer[i]),
                    "line_cw": int(self.line_cw[i]),
                    "line_ccw": int(self.line_ccw[i]),
                }
            )
        return rows


def build_stop_plan(
    corridor: Corridor, profiles: DesignProfiles, m_cw: int, m_ccw: int
) -> StopPlan:
    """Full pipeline: fit profiles, place stops, pick transfers, deal lines."""
    fit = fit_profiles(corridor, profiles)
    positions = place_stops(fit)
    transfer_idx = select_transfer_stops(fit, positions, m_cw, m_ccw)
    line_cw, line_ccw = assign_lines(positions, transfer_idx, m_cw, m_ccw)
    is_transfer = np.zeros(positions.size, dtype=bool)
    is_transfer[transfer_idx] = True
    return StopPlan(
        corridor=corridor,
        m_cw=m_cw,
        m_ccw=m_ccw,
        positions=positions,
        is_transfer=is_transfer,
        line_cw=line_cw,
        line_ccw=line_ccw,
    )
