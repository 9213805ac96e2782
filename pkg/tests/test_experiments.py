import csv
import hashlib
import math
from pathlib import Path

import numpy as np
import pytest

from skipstop import cli
from skipstop.experiments import (
    CASES_COLUMNS,
    ScenarioConfig,
    _cell,
    emit_reports,
    run_case,
    run_sweep,
    sweep_grid,
    table1_grid,
)

# small grid + modest demand keeps full-pipeline runs around a quarter second
CHEAP = dict(e_l=8.0, sigma_l=2.0, mu=10.0, lambda_per_km=37.5, cells=40)


@pytest.fixture(scope="module")
def cheap_result():
    return run_case(ScenarioConfig(mode="bus", sigma_o=None, **CHEAP))


def test_grid_sizes_and_unique_ids():
    t1 = table1_grid()
    sw = sweep_grid()
    assert len(t1) == 144
    assert len(sw) == 216
    assert len({c.case_id for c in t1}) == 144
    assert len({c.case_id for c in sw}) == 216
    assert {c.case_id for c in t1} <= {c.case_id for c in sw}


def test_case_id_slugs():
    base = ScenarioConfig(mode="bus", sigma_o=8.0, e_l=12.0, sigma_l=4.0, mu=20.0,
                          lambda_per_km=150.0)
    assert base.case_id == "bus-o8-el12-sl4-mu20-d150"
    assert base.replace(sigma_o=None).case_id == "bus-oinf-el12-sl4-mu20-d150"
    assert base.replace(c_t_min=2.0).case_id.endswith("-ct2")
    assert base.replace(v_w=6.0).case_id.endswith("-vw6")
    assert base.replace(w_b=3.0).case_id.endswith("-wb3")
    assert base.replace(cells=40).case_id.endswith("-L40-n40")
    assert base.replace(lambda_per_km=37.5).case_id.endswith("-d37.5")


def test_config_validation():
    ok = dict(mode="bus", sigma_o=8.0, e_l=8.0, sigma_l=2.0, mu=10.0, lambda_per_km=75.0)
    ScenarioConfig(**ok)
    with pytest.raises(ValueError):
        ScenarioConfig(**{**ok, "mode": "tram"})
    with pytest.raises(ValueError):
        ScenarioConfig(**{**ok, "sigma_o": 0.0})
    with pytest.raises(ValueError):
        ScenarioConfig(**{**ok, "e_l": -1.0})
    with pytest.raises(ValueError):
        ScenarioConfig(**{**ok, "w_b": -0.5})


def test_params_passthrough():
    cfg = ScenarioConfig(mode="rail", sigma_o=None, e_l=8.0, sigma_l=2.0, mu=20.0,
                         lambda_per_km=500.0, c_t_min=2.0, v_w=4.0, w_b=3.0)
    p = cfg.params()
    assert p.cruise_speed == 60.0
    assert p.transfer_penalty == pytest.approx(2.0 / 60.0)
    assert p.walk_speed == 4.0
    assert p.backtrack_weight == 3.0
    assert p.cost_per_veh_h == pytest.approx(101.0 + 5.0 * 20.0)


def test_run_case_identities(cheap_result):
    res = cheap_result
    assert res.status == "ok"
    best, allstop = res.solution, res.all_stop
    assert res.savings_pct == pytest.approx((allstop.gc - best.gc) / allstop.gc, abs=1e-15)
    assert res.gap_pct == pytest.approx(
        (best.gc - res.lower.gc_lb) / res.lower.gc_lb, abs=1e-15
    )
    assert res.savings_pct >= 0.0  # the all-stop design is always a candidate
    assert res.gap_pct >= -1e-4
    assert len(res.report.rows) == 11
    assert res.plan.n_stops > 0
    assert res.binding == best.binding
    assert set(res.seconds) == {"preprocess", "solve", "bound", "plan_eval"}


def test_run_sweep_matches_individual_runs():
    configs = [
        ScenarioConfig(mode="bus", sigma_o=None, **CHEAP),
        ScenarioConfig(mode="bus", sigma_o=8.0, **CHEAP),
    ]
    swept = run_sweep(configs)
    solo = [run_case(c) for c in configs]
    assert [r.case_id for r in swept] == [c.case_id for c in configs]
    for a, b in zip(swept, solo):
        assert a.status == b.status == "ok"
        assert a.solution.gc == b.solution.gc
        assert a.savings_pct == b.savings_pct
        assert a.gap_pct == b.gap_pct


def _sha_tree(root: Path) -> dict:
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.iterdir())
    }


def test_emit_reports_layout_and_determinism(cheap_result, tmp_path):
    res = cheap_result
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    paths = emit_reports([res], dir_a)
    emit_reports([res], dir_b)

    names = {p.name for p in paths}
    cid = res.case_id
    assert names == {
        "cases.csv",
        "summary.csv",
        f"profiles_{cid}.csv",
        f"plan_{cid}.csv",
        f"errors_{cid}.csv",
    }
    with (dir_a / "cases.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CASES_COLUMNS
    assert len(rows) == 2
    row = dict(zip(rows[0], rows[1]))
    assert row["case_id"] == cid
    assert row["status"] == "ok"
    # CSV floats survive a repr round trip bit-for-bit
    assert float(row["gc_ab"]) == res.solution.gc
    assert float(row["savings_frac"]) == res.savings_pct
    assert row["sigma_o"] == "inf"
    assert row["capacity_ok"] in ("0", "1")

    assert _sha_tree(dir_a) == _sha_tree(dir_b)


def test_cell_formatting():
    assert _cell(None) == ""
    assert _cell(True) == "1" and _cell(False) == "0"
    assert _cell(np.bool_(True)) == "1"
    assert _cell(7) == "7" and _cell(np.int64(-3)) == "-3"
    assert _cell(math.nan) == "nan"
    for v in (0.1, 1.0 / 3.0, 1e-17, 123456.789):
        assert float(_cell(v)) == v
    assert _cell("text") == "text"


# ---------------------------------------------------------------------------
# command line


CHEAP_FLAGS = [
    "--lambda-per-km", "37.5", "--mu", "10", "--e-l", "8", "--sigma-l", "2",
    "--cells", "40",
]


def test_cli_solve_prints_summary(capsys):
    rc = cli.main(["solve", "--mode", "bus"] + CHEAP_FLAGS)
    out = capsys.readouterr().out
    assert rc == 0
    assert "case bus-oinf-el8-sl2-mu10-d37.5-L40-n40" in out
    assert "GC=" in out and "savings=" in out


def test_cli_rejects_bad_sigma(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--mode", "bus", "--sigma-o", "wide"])
    assert exc.value.code == 2


def test_cli_rejects_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[scenario]\nwheelbase = 3\n")
    rc = cli.main(["solve", "--config", str(cfg)])
    assert rc == 2
    assert "wheelbase" in capsys.readouterr().err


def test_cli_missing_config_file():
    assert cli.main(["solve", "--config", "/nonexistent.ini"]) == 2


def test_cli_verify_prints_component_table(capsys):
    rc = cli.main(["verify", "--mode", "bus"] + CHEAP_FLAGS)
    out = capsys.readouterr().out
    assert rc == 0
    for name in ("gc", "user", "agency", "access", "wait", "in_vehicle",
                 "transfer", "op_distance", "op_time", "infra_line", "infra_stop"):
        assert any(line.startswith(name) for line in out.splitlines())
    assert "capacity: ok" in out


def test_cli_plan_streams_rows(capsys):
    rc = cli.main(["plan", "--mode", "bus"] + CHEAP_FLAGS)
    captured = capsys.readouterr()
    assert rc == 0
    lines = captured.out.splitlines()
    assert lines[0] == "stop,x_km,is_transfer,line_cw,line_ccw"
    assert lines[1].startswith("0,0.00000,")
    assert "transfer stops" in captured.err


def test_cli_bound_runs(capsys):
    rc = cli.main(["bound", "--mode", "bus"] + CHEAP_FLAGS)
    assert rc == 0
    assert "lower bound" in capsys.readouterr().out


def test_cli_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[scenario]\n"
        "mode = bus\n"
        "sigma_o = inf\n"
        "e_l = 8\n"
        "sigma_l = 2\n"
        "mu = 5\n"
        "lambda_per_km = 37.5\n"
        "cells = 40\n"
        "[solver]\n"
        "relaxation = 0.4\n"
    )
    file_cfg = cli._load_config_file(str(cfg))
    assert file_cfg["scenario"]["mu"] == 5.0
    assert file_cfg["scenario"]["sigma_o"] == math.inf
    assert file_cfg["solver"]["relaxation"] == 0.4

    parser = cli.build_parser()
    args = parser.parse_args(["solve", "--config", str(cfg)])
    assert cli._scenario_from(args, file_cfg).mu == 5.0
    args = parser.parse_args(["solve", "--config", str(cfg), "--mu", "10"])
    merged = cli._scenario_from(args, file_cfg)
    assert merged.mu == 10.0  # flag beats file
    assert merged.sigma_o is None  # inf maps to uniform origins
    assert cli._settings_from(file_cfg).relaxation == 0.4


def test_cli_solver_section_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[solver]\nturbo = yes\n")
    assert cli.main(["solve", "--config", str(cfg)]) == 2


def test_cli_sweep_writes_reports(tmp_path, monkeypatch, capsys):
    small = [ScenarioConfig(mode="bus", sigma_o=None, **CHEAP)]
    monkeypatch.setattr(cli, "sweep_grid", lambda **kw: small)
    out = tmp_path / "reports"
    rc = cli.main(["sweep", "--out", str(out)])
    assert rc == 0
    assert (out / "cases.csv").exists()
    assert (out / "summary.csv").exists()
    assert "1/1 cases ok" in capsys.readouterr().out
