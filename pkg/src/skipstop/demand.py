"""Demand representation on a closed loop corridor.

The corridor is a loop of fixed length discretized into equal cells; demand
is a trip-rate density lam(x, y) (trips/h per km^2) between origin x and
destination y, both measured clockwise from a reference point. Patrons ride
the short way around: clockwise (CW) when the CW distance from x to y is in
(0, L/2], counter-clockwise (CCW) otherwise. Trips of length exactly L/2 go CW.

All integrals use the midpoint rule on cell centers. The parametric family
used throughout composes an origin density p(x) (uniform, or a renormalized
normal centered at mid-loop), a trip-length density theta(l) (uniform on a
symmetric interval), and a total rate per direction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class Corridor:
    """Loop geometry and discretization grid.

    length_km: loop circumference.
    cells: number of grid cells (even, so half-loop arcs align with the grid).
    """

    length_km: float = 40.0
    cells: int = 80

    def __post_init__(self):
        if not self.length_km > 0:
            raise ValueError("length_km must be positive")
        if self.cells < 4 or self.cells % 2:
            raise ValueError("cells must be an even integer >= 4")

    @property
    def dx(self) -> float:
        return self.length_km / self.cells

    @property
    def centers(self) -> np.ndarray:
        """Cell-center coordinates x_j = (j + 0.5) dx, j = 0..cells-1."""
        return (np.arange(self.cells) + 0.5) * self.dx


def circular_trip_length(x, y, length_km: float):
    """Shortest arc distance between x and y on a loop of the given length."""
    d = np.abs(np.asarray(y, dtype=float) - np.asarray(x, dtype=float)) % length_km
    return np.minimum(d, length_km - d)


@dataclass(frozen=True)
class DemandSpec:
    """Parametric demand family.

    demand_rate: loop-total trip rate per direction of travel (trips/h);
        equals the sweep's demand density (trips/h/km) times loop length.
    trip_len_mean / trip_len_sd: mean and standard deviation of the uniform
        trip-length density; its support is mean +- sqrt(3) * sd.
    origin_sd: spread of the normal origin density centered at mid-loop;
        None selects uniform origins.
    """

    demand_rate: float
    trip_len_mean: float
    trip_len_sd: float
    origin_sd: float | None = None

    def __post_init__(self):
        if not self.demand_rate > 0:
            raise ValueError("demand_rate must be positive")
        if not self.trip_len_sd >= 0:
            raise ValueError("trip_len_sd must be non-negative")
        if self.origin_sd is not None and not self.origin_sd > 0:
            raise ValueError("origin_sd must be positive (or None for uniform)")

    def validate_support(self, length_km: float) -> None:
        lo = self.trip_len_mean - _SQRT3 * self.trip_len_sd
        hi = self.trip_len_mean + _SQRT3 * self.trip_len_sd
        if not lo > 0:
            raise ValueError(f"trip-length support lower end {lo:.3f} km must be > 0")
        if hi > length_km / 2 + 1e-12:
            raise ValueError(
                f"trip-length support upper end {hi:.3f} km exceeds half loop "
                f"{length_km / 2:.3f} km"
            )


@dataclass(frozen=True)
class DemandField:
    """Discretized demand and the aggregates every cost term consumes.

    lam[a, c] is the density between origin cell a and destination cell c.
    Per direction: p_* boarding density P(x), q_* alighting density Q(x)
    (trips/h/km), flow_* the rate of patrons crossing x on board (trips/h),
    rate_* the loop-total directional rate (trips/h).

    window_ratio_* are precomputed tables for the contained-demand integral
    I(x, w) over symmetric windows: entry [k, j] approximates
    I(x_j, 2k dx) / (2k dx)^2, so that I varies quadratically between levels.
    """

    corridor: Corridor
    lam: np.ndarray
    p_cw: np.ndarray
    p_ccw: np.ndarray
    q_cw: np.ndarray
    q_ccw: np.ndarray
    flow_cw: np.ndarray
    flow_ccw: np.ndarray
    rate_cw: float
    rate_ccw: float
    window_ratio_cw: np.ndarray
    window_ratio_ccw: np.ndarray

    @property
    def boarding_alighting_cw(self) -> np.ndarray:
        return self.p_cw + self.q_cw

    @property
    def boarding_alighting_ccw(self) -> np.ndarray:
        return self.p_ccw + self.q_ccw


def _directional_aggregates(corridor: Corridor, lam: np.ndarray):
    n = corridor.cells
    dx = corridor.dx
    half = n // 2
    idx = np.arange(n)

    p_cw = np.zeros(n)
    q_cw = np.zeros(n)
    p_ccw = np.zeros(n)
    q_ccw = np.zeros(n)
    flow_cw = np.zeros(n)
    flow_ccw = np.zeros(n)

    # CW trips: destination offset d = 1..half (offset exactly half goes CW).
    for d in range(1, half + 1):
        diag = lam[idx, (idx + d) % n]
        p_cw += diag * dx
        q_cw[(idx + d) % n] += diag * dx
        flow_cw += _occupancy_sum(diag, d) * dx * dx
    # CCW trips: displacement l = 1..half-1 against the coordinate.
    for l in range(1, half):
        diag = lam[idx, (idx - l) % n]
        p_ccw += diag * dx
        q_ccw[(idx - l) % n] += diag * dx
        flow_ccw += _occupancy_sum(diag[::-1], l)[::-1] * dx * dx

    return p_cw, p_ccw, q_cw, q_ccw, flow_cw, flow_ccw


def _occupancy_sum(origin_rates: np.ndarray, d: int) -> np.ndarray:
    """Flow past each cell from trips advancing d cells from each origin.

    A trip spanning cells a..a+d counts with weight 1/2 at its end cells and
    1 in between, so total flow equals demand times trip length exactly.
    Returns out[j] = sum_e w_e * origin_rates[(j - e) % n], e = 0..d.
    """
    n = origin_rates.size
    doubled = np.concatenate([origin_rates, origin_rates])
    cs = np.concatenate([[0.0], np.cumsum(doubled)])
    j = np.arange(n) + n
    # window e = 0..d ending at j, i.e. cells j-d..j of the doubled array
    full = cs[j + 1] - cs[j - d]
    return full - 0.5 * doubled[j] - 0.5 * doubled[j - d]


def _triangle_tables(corridor: Corridor, lam: np.ndarray):
    """Trapezoid-weighted contained-demand sums on nested triangular windows.

    For half-width k cells the CW table sums lam over cell offsets
    {-k <= o <= q <= k} around each grid point (origins o, destinations q
    reached clockwise), with weight 1/2 on the window edges and on the o = q
    diagonal (1/4 where both apply). The construction integrates a constant
    density exactly: sum of weights = 2 k^2. The CCW table mirrors to q <= o.
    Entry [k, j] stores I_k(x_j) / (2k dx)^2; level 0 stores lam[j, j] / 2,
    the limit of I(w)/w^2 as w -> 0.
    """
    n = corridor.cells
    dx = corridor.dx
    kmax = n // 4
    idx = np.arange(n)
    ratio_cw = np.empty((kmax + 1, n))
    ratio_ccw = np.empty((kmax + 1, n))
    ratio_cw[0] = 0.5 * lam[idx, idx]
    ratio_ccw[0] = ratio_cw[0]
    for k in range(1, kmax + 1):
        o, q = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
        upper = q >= o
        w = np.ones_like(o, dtype=float)
        w[np.abs(o) == k] *= 0.5
        w[np.abs(q) == k] *= 0.5
        w[o == q] *= 0.5
        o_u, q_u, w_u = o[upper], q[upper], w[upper]
        gath = lam[(idx[None, :] + o_u[:, None]) % n, (idx[None, :] + q_u[:, None]) % n]
        window = 2 * k * dx
        ratio_cw[k] = (w_u @ gath) * dx * dx / window**2
        lower = q <= o
        o_l, q_l, w_l = o[lower], q[lower], w[lower]
        gath = lam[(idx[None, :] + o_l[:, None]) % n, (idx[None, :] + q_l[:, None]) % n]
        ratio_ccw[k] = (w_l @ gath) * dx * dx / window**2
    return ratio_cw, ratio_ccw


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


def _assemble(corridor: Corridor, lam: np.ndarray) -> DemandField:
    p_cw, p_ccw, q_cw, q_ccw, flow_cw, flow_ccw = _directional_aggregates(corridor, lam)
    ratio_cw, ratio_ccw = _triangle_tables(corridor, lam)
    return DemandField(
        corridor=corridor,
        lam=_freeze(lam),
        p_cw=_freeze(p_cw),
        p_ccw=_freeze(p_ccw),
        q_cw=_freeze(q_cw),
        q_ccw=_freeze(q_ccw),
        flow_cw=_freeze(flow_cw),
        flow_ccw=_freeze(flow_ccw),
        rate_cw=float(np.sum(p_cw) * corridor.dx),
        rate_ccw=float(np.sum(p_ccw) * corridor.dx),
        window_ratio_cw=_freeze(ratio_cw),
        window_ratio_ccw=_freeze(ratio_ccw),
    )


def build_demand_field(corridor: Corridor, spec: DemandSpec) -> DemandField:
    """Evaluate the parametric family on the grid and precompute aggregates.

    Both the origin density and the trip-length density are renormalized on
    the grid so the discrete directional totals equal spec.demand_rate
    exactly, mirroring the continuum normalization.
    """
    spec.validate_support(corridor.length_km)
    n = corridor.cells
    dx = corridor.dx
    x = corridor.centers

    if spec.origin_sd is None:
        p = np.full(n, 1.0 / corridor.length_km)
    else:
        p = np.exp(-0.5 * ((x - corridor.length_km / 2) / spec.origin_sd) ** 2)
        p /= p.sum() * dx

    lo = spec.trip_len_mean - _SQRT3 * spec.trip_len_sd
    hi = spec.trip_len_mean + _SQRT3 * spec.trip_len_sd
    lengths = np.arange(1, n // 2 + 1) * dx  # one-way lengths on the grid
    theta_raw = ((lengths >= lo) & (lengths <= hi)).astype(float)
    total = theta_raw.sum() * dx
    if total <= 0:
        raise ValueError("trip-length support does not cover any grid length")
    theta_of_cells = theta_raw / total

    lam = np.zeros((n, n))
    idx = np.arange(n)
    for d in range(1, n):
        l = min(d, n - d) * dx
        k = int(round(l / dx))
        theta_val = theta_of_cells[k - 1]
        if theta_val:
            lam[idx, (idx + d) % n] = p * theta_val * spec.demand_rate
    return _assemble(corridor, lam)


def field_from_matrix(corridor: Corridor, lam: np.ndarray) -> DemandField:
    """Build a field from a raw cell-centered density matrix (trips/h/km^2).

    The diagonal (zero-length trips) is ignored by the directional
    aggregates; the matrix is used as given otherwise.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (corridor.cells, corridor.cells):
        raise ValueError(f"lam must have shape {(corridor.cells, corridor.cells)}")
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise ValueError("lam must be finite and non-negative")
    return _assemble(corridor, lam)


def contained_demand(field: DemandField, window_km, direction: str, *, cap_window: bool = False):
    """Trip rate fully contained in a symmetric window around each point.

    Integrates lam over origin-destination pairs that both lie within
    window_km of x (half on each side) with the destination on the given
    side ("cw" or "ccw") of the origin. window_km broadcasts against the
    grid; values above half the loop raise unless cap_window clips them.
    """
    corridor = field.corridor
    half_loop = corridor.length_km / 2
    w = np.asarray(window_km, dtype=float)
    if np.any(w < 0):
        raise ValueError("window must be non-negative")
    if np.any(w > half_loop + 1e-9):
        if cap_window:
            over = int(np.count_nonzero(w > half_loop + 1e-9))
            log.debug("capping %d contained-demand windows at half loop", over)
            w = np.minimum(w, half_loop)
        else:
            raise ValueError("window exceeds half the loop length")
    else:
        w = np.minimum(w, half_loop)

    table = field.window_ratio_cw if direction == "cw" else field.window_ratio_ccw
    if direction not in ("cw", "ccw"):
        raise ValueError("direction must be 'cw' or 'ccw'")
    kmax = table.shape[0] - 1
    t = w / (2 * corridor.dx)
    k = np.minimum(t.astype(int), kmax - 1)
    frac = t - k
    j = np.arange(corridor.cells)
    lo = table[k, j]
    hi = table[k + 1, j]
    return w**2 * (lo + frac * (hi - lo))


def backtrack_densities(
    field: DemandField,
    spacing_km,
    stops_per_bay,
    m_cw: int,
    m_ccw: int,
    *,
    cap_window: bool = False,
):
    """Backtracking trip density (trips/h/km) per direction.

    A patron whose origin and destination fall inside one skip-stop bay of
    width T(x) s(x) backtracks when the two stops sit on different lines;
    the chance is (m-1)(T-1)^2 / (m T^2) against the locally-contained mean
    density I(x, Ts) / (Ts). Zero when m = 1 or T = 1.
    """
    s = np.asarray(spacing_km, dtype=float)
    t = np.asarray(stops_per_bay, dtype=float)
    if np.any(s <= 0):
        raise ValueError("spacing must be positive")
    if np.any(t < 1):
        raise ValueError("stops_per_bay must be >= 1")
    w = s * t
    if not cap_window and np.any(w > field.corridor.length_km / 2 + 1e-9):
        raise ValueError("bay window exceeds half the loop length")
    shape = np.broadcast_shapes(np.shape(s), np.shape(t), (field.corridor.cells,))
    out = []
    for m, direction in ((m_cw, "cw"), (m_ccw, "ccw")):
        if m == 1:
            out.append(np.zeros(shape))
            continue
        contained = contained_demand(field, w, direction, cap_window=cap_window)
        mean_density = contained / np.maximum(w, 1e-300)
        out.append((m - 1) * (t - 1) ** 2 / (m * t**2) * mean_density)
    return out[0], out[1]
