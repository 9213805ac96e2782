"""Anatomy of the generalized cost for one hand-picked design."""

import numpy as np

from skipstop import (
    Corridor,
    DemandSpec,
    DesignProfiles,
    DesignScalars,
    build_demand_field,
    bus_params,
    generalized_cost,
)

corridor = Corridor(length_km=40.0, cells=80)
field = build_demand_field(
    corridor,
    DemandSpec(demand_rate=6000.0, trip_len_mean=12.0, trip_len_sd=4.0, origin_sd=8.0),
)
params = bus_params(20.0)

n = corridor.cells
design = dict(
    scalars=DesignScalars(m_cw=2, m_ccw=2, headway_cw=2.0 / 60.0, headway_ccw=2.0 / 60.0),
    profiles=DesignProfiles(spacing=np.full(n, 0.5), stops_per_bay=np.full(n, 3.0)),
)

bd = generalized_cost(field, design["scalars"], design["profiles"], params)
print("two lines per direction, 2 min headways, 0.5 km stops, bays of 3:")
for name in ("access", "wait", "in_vehicle", "transfer",
             "op_distance", "op_time", "infra_line", "infra_stop"):
    print(f"  {name:12s} {getattr(bd, name):10.1f} patron-h/h")
print(f"  {'user':12s} {bd.user_total:10.1f}")
print(f"  {'agency':12s} {bd.agency_total:10.1f}")
print(f"  {'total':12s} {bd.total:10.1f}")

# spacing trades walking against riding and stop hardware: sweep it with
# everything else held fixed and the U-shape appears
print("\nuniform spacing sweep (same scalars, bays of 3):")
for s in (0.25, 0.4, 0.6, 0.9, 1.3):
    prof = DesignProfiles(spacing=np.full(n, s), stops_per_bay=np.full(n, 3.0))
    total = generalized_cost(field, design["scalars"], prof, params).total
    print(f"  s = {s:4.2f} km -> GC {total:9.1f}")

# skipping stops cuts dwell but adds transfers and backtracking
print("\nbay size sweep at s = 0.5 km:")
for t in (1.0, 2.0, 3.0, 5.0, 8.0):
    prof = DesignProfiles(spacing=np.full(n, 0.5), stops_per_bay=np.full(n, t))
    total = generalized_cost(field, design["scalars"], prof, params).total
    print(f"  T = {t:3.0f} -> GC {total:9.1f}")
