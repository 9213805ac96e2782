"""Watch the two-stage search pick a design.

Stage 1 alternates pointwise profile updates with a smoothed backtrack
refit at fixed line counts and headways; stage 2 wraps it in a headway
fixed point and enumerates the line-count cells. The result object keeps
the whole trace, so the convergence path can be inspected after the fact.
"""

import numpy as np

from skipstop import Corridor, DemandSpec, build_demand_field, bus_params, stage2_solve

field = build_demand_field(
    Corridor(length_km=40.0, cells=80),
    DemandSpec(demand_rate=6000.0, trip_len_mean=12.0, trip_len_sd=4.0, origin_sd=8.0),
)
params = bus_params(20.0)

res = stage2_solve(field, params)
print(f"status: {res.status}")

print("\nline-count cells (GC in patron-h/h):")
for cell in sorted(res.cells, key=lambda c: (c.m_cw, c.m_ccw)):
    if cell.status != "ok":
        print(f"  m=({cell.m_cw},{cell.m_ccw})  {cell.status}: {cell.reason}")
        continue
    sol = cell.solution
    sc = sol.scalars
    mark = " <- best" if sol is res.best else ""
    print(
        f"  m=({sc.m_cw},{sc.m_ccw})  H=({sc.headway_cw * 60:.2f},{sc.headway_ccw * 60:.2f}) min"
        f"  GC {sol.gc:9.2f}  feasible={sol.feasible}{mark}"
    )

best = res.best
print(f"\nbinding constraint: {best.binding or 'none'}")
print(f"headway fixed point trace ({best.iterations} outer iterations):")
for it, h_cw, h_ccw, resid, gc in best.trace:
    print(f"  {it:2d}: H=({h_cw * 60:.3f},{h_ccw * 60:.3f}) min  residual {resid:.2e}  GC {gc:.2f}")

s, t = best.profiles.spacing, best.profiles.stops_per_bay
print("\nwinning profiles across the loop:")
print(f"  spacing km   : min {s.min():.3f}  median {np.median(s):.3f}  max {s.max():.3f}")
print(f"  stops per bay: min {t.min():.0f}  median {np.median(t):.0f}  max {t.max():.0f}")
print(f"  backtrack densities peak {max(best.b_cw.max(), best.b_ccw.max()):.2f} trips/h/km")

allstop = res.all_stop
print(f"\nall-stop benchmark GC {allstop.gc:.2f} -> savings "
      f"{100 * (allstop.gc - best.gc) / allstop.gc:.2f}%")
