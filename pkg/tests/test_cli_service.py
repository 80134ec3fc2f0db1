"""End-to-end CLI and service tests over the in-process transport."""

import json
from pathlib import Path

import numpy as np
import pytest

from frostflow.cli import _InProcessClient, main
from frostflow.scenario import PRESETS, Scenario
from frostflow.service.app import app


def small_zero_forcing(tmp_path, **solver):
    data = PRESETS["zero_forcing"]()
    data["mesh"]["resolution"] = 30
    data["solver"].update({"dt": 0.002, "t_end": 0.02, **solver})
    path = tmp_path / "config.json"
    path.write_text(Scenario.from_dict(data).to_text(), encoding="utf-8")
    return path


def small_freeze_thaw(tmp_path, **solver):
    data = PRESETS["freeze_thaw"]()
    data["mesh"]["resolution"] = 40
    data["solver"].update({"dt": 0.002, "t_end": 0.05, **solver})
    path = tmp_path / "ft.json"
    path.write_text(Scenario.from_dict(data).to_text(), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# service endpoints


def test_health_endpoint():
    with _InProcessClient(app) as client:
        # health is a GET; drive it through the ASGI transport directly
        import asyncio

        import httpx

        async def go():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://svc") as c:
                return await c.get("/health")

        resp = asyncio.run(go())
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["schema_version"] == "1"


def test_validate_endpoint_rejects_bad_config():
    with _InProcessClient(app) as client:
        resp = client.post("/validate", json={"config": {"mesh": {}}})
    assert resp.status_code == 422


def test_run_endpoint_writes_bundle(tmp_path):
    config = PRESETS["zero_forcing"]()
    config["mesh"]["resolution"] = 25
    config["solver"] = {"dt": 0.002, "t_end": 0.01}
    with _InProcessClient(app) as client:
        resp = client.post("/run", json={"config": config,
                                         "out_dir": str(tmp_path / "out")})
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "completed"
    out = tmp_path / "out"
    assert (out / "timeseries.csv").exists()
    assert (out / "snapshots.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == "1"
    assert summary["validation"]["passed"] is True


# ---------------------------------------------------------------------------
# CLI exit codes


def test_cli_validate_pass(capsys):
    assert main(["validate", "--config", "preset:zero_forcing"]) == 0
    out = capsys.readouterr().out
    assert "all admissibility clauses hold" in out


def test_cli_validate_failure(capsys):
    assert main(["validate", "--config", "preset:linear_regime"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out


def test_cli_validate_missing_file(tmp_path, capsys):
    rc = main(["validate", "--config", str(tmp_path / "absent.json")])
    assert rc == 2


def test_cli_validate_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"mesh": [,]}', encoding="utf-8")
    rc = main(["validate", "--config", str(bad)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "line" in err


def test_cli_run_and_determinism(tmp_path, capsys):
    config = small_zero_forcing(tmp_path)
    rc1 = main(["run", "--config", str(config), "--out-dir",
                str(tmp_path / "a"), "--seed", "7"])
    rc2 = main(["run", "--config", str(config), "--out-dir",
                str(tmp_path / "b"), "--seed", "7"])
    assert rc1 == rc2 == 0
    for name in ("timeseries.csv", "snapshots.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() \
            == (tmp_path / "b" / name).read_bytes()


def test_cli_run_zero_forcing_constant_series(tmp_path):
    config = small_zero_forcing(tmp_path)
    assert main(["run", "--config", str(config), "--out-dir",
                 str(tmp_path / "out")]) == 0
    rows = (tmp_path / "out" / "timeseries.csv").read_text().splitlines()
    header = rows[0].split(",")
    i_pmin, i_pmax = header.index("p_min"), header.index("p_max")
    i_def = header.index("ledger_defect")
    for row in rows[1:]:
        vals = row.split(",")
        assert float(vals[i_pmin]) == 0.0
        assert float(vals[i_pmax]) == 0.0
        assert float(vals[i_def]) == 0.0


def test_cli_run_validation_gate_and_force(tmp_path, capsys):
    data = PRESETS["linear_regime"]()
    data["solver"].update({"dt": 0.0025, "t_end": 0.01})
    config = tmp_path / "linear.json"
    config.write_text(Scenario.from_dict(data).to_text(), encoding="utf-8")
    rc = main(["run", "--config", str(config), "--out-dir",
               str(tmp_path / "gated")])
    assert rc == 1
    summary = json.loads((tmp_path / "gated" / "summary.json").read_text())
    assert summary["status"] == "validation_failed"
    rc = main(["run", "--config", str(config), "--out-dir",
               str(tmp_path / "forced"), "--force"])
    assert rc == 0
    summary = json.loads((tmp_path / "forced" / "summary.json").read_text())
    assert summary["status"] == "completed"


def test_cli_run_failure_marker(tmp_path, capsys):
    config = small_freeze_thaw(tmp_path, max_iter=1, max_halvings=0)
    rc = main(["run", "--config", str(config), "--out-dir",
               str(tmp_path / "broken")])
    assert rc == 3
    assert (tmp_path / "broken" / "FAILED").exists()
    summary = json.loads((tmp_path / "broken" / "summary.json").read_text())
    assert summary["status"] == "failed"


def test_cli_converge_zero_forcing_degenerate(tmp_path, capsys):
    config = small_zero_forcing(tmp_path)
    rc = main(["converge", "--config", str(config), "--levels", "3",
               "--out-dir", str(tmp_path / "conv")])
    assert rc == 0
    report = json.loads((tmp_path / "conv" / "convergence.json").read_text())
    assert len(report["levels"]) == 3
    for diffs in report["cauchy_differences"].values():
        assert all(d == 0.0 for d in diffs)     # stationary: zero differences


def test_cli_converge_dynamic_first_order(tmp_path, capsys):
    config = small_freeze_thaw(tmp_path, dt=0.002, t_end=0.1)
    rc = main(["converge", "--config", str(config), "--levels", "3",
               "--out-dir", str(tmp_path / "conv")])
    assert rc == 0
    report = json.loads((tmp_path / "conv" / "convergence.json").read_text())
    for key in ("p", "theta", "u"):
        for ratio in report["cauchy_ratios"][key]:
            assert ratio >= 1.5
    for order in report["defect_orders"]:
        assert 0.5 <= order <= 1.5


def test_cli_converge_rejects_too_few_levels(tmp_path):
    config = small_zero_forcing(tmp_path)
    rc = main(["converge", "--config", str(config), "--levels", "2"])
    assert rc == 2
