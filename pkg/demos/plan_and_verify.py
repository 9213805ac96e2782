"""From continuous profiles to a buildable stop plan, then audit it.

The planner integrates 1/spacing to place stops, picks transfer stops so
every line makes equal stops inside each bay, and deals the rest out
cyclically. The exact evaluator then re-prices the corridor pair by pair
on the discrete plan — no continuum shortcuts — and reports how far the
design model drifted.
"""

import numpy as np

from skipstop import (
    Corridor,
    DemandSpec,
    build_demand_field,
    build_stop_plan,
    bus_params,
    error_report,
    exact_costs,
    stage2_solve,
)

field = build_demand_field(
    Corridor(length_km=40.0, cells=80),
    DemandSpec(demand_rate=6000.0, trip_len_mean=12.0, trip_len_sd=4.0, origin_sd=8.0),
)
params = bus_params(20.0)
best = stage2_solve(field, params).best

plan = build_stop_plan(field.corridor, best.profiles, best.scalars.m_cw, best.scalars.m_ccw)
n_tr = int(plan.is_transfer.sum())
print(f"{plan.n_stops} stops, {n_tr} transfer stops, m=({plan.m_cw},{plan.m_ccw})")

print("\nfirst stops (x km, transfer?, line cw/ccw):")
for row in plan.to_rows()[:8]:
    print(f"  {row['stop']:3d}  {row['x_km']:6.3f}  {row['is_transfer']}  "
          f"{row['line_cw']:2d} {row['line_ccw']:2d}")

gaps = plan.realized_spacings()
bays = plan.realized_bays()
print(f"\nrealized spacing: {gaps.min():.3f} .. {gaps.max():.3f} km "
      f"(designed {best.profiles.spacing.min():.3f} .. {best.profiles.spacing.max():.3f})")
print(f"realized bays: {bays.min():.0f} .. {bays.max():.0f} stop gaps")
# equal-stops bookkeeping: skipped stops between transfers divide by lcm
skipped = np.diff(plan.transfer_indices) - 1
block = np.lcm(plan.m_cw, plan.m_ccw)
print(f"skipped-per-bay multiples of {block}: {sorted(set(skipped.tolist()))}")

exact = exact_costs(field, plan, best.scalars, params)
shares = exact.gamma_demand / exact.gamma_demand.sum()
print("\ntrip types (direct/one-end/same-line/backtrack/interchange):")
print("  " + "  ".join(f"{100 * v:.1f}%" for v in shares))
print(f"capacity check: ok={exact.capacity_ok} (max load ratio {exact.max_load_ratio:.3f})")

print("\nexact vs design-model costs:")
rep = error_report(exact.breakdown, best.breakdown)
for row in rep.rows:
    print(f"  {row.name:12s} exact {row.exact:9.2f}  model {row.approx:9.2f}  "
          f"err {100 * row.error:6.3f}%")
