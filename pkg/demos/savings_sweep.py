"""Where does skip-stop pay? A miniature scenario sweep.

Runs the full pipeline (design, bound, discrete plan, exact audit) over a
demand-density ladder for one bus and one rail setting, then prints the
savings over all-stop operation. The full report grid lives behind
``skipstop sweep``; this is the two-minute version.
"""

from skipstop import ScenarioConfig, run_case

LADDERS = (
    ("bus, concentrated origins",
     ScenarioConfig(mode="bus", sigma_o=8.0, e_l=12.0, sigma_l=4.0, mu=20.0,
                    lambda_per_km=37.5),
     (37.5, 75.0, 150.0)),
    ("rail, strongly peaked",
     ScenarioConfig(mode="rail", sigma_o=4.0, e_l=12.0, sigma_l=4.0, mu=20.0,
                    lambda_per_km=250.0),
     (250.0, 500.0, 1000.0)),
)

for label, base, densities in LADDERS:
    print(f"\n{label}:")
    print(f"  {'trips/h/km':>10s} {'m':>6s} {'H min':>11s} {'savings':>8s} {'gap':>7s} {'GC err':>7s}")
    for dens in densities:
        res = run_case(base.replace(lambda_per_km=dens))
        if res.status != "ok":
            print(f"  {dens:10.1f}  {res.status} ({res.binding})")
            continue
        sc = res.solution.scalars
        err = res.report.by_name()["gc"].error
        print(
            f"  {dens:10.1f} ({sc.m_cw},{sc.m_ccw}) "
            f"({sc.headway_cw * 60:4.2f},{sc.headway_ccw * 60:4.2f})"
            f" {100 * res.savings_pct:7.2f}% {100 * res.gap_pct:6.2f}% {100 * err:6.2f}%"
        )

print("\nreading: savings climb with density and trip length; the gap and")
print("audit columns say how trustworthy each row is.")
