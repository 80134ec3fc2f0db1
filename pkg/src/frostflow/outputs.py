"""Run outputs: delimited text tables plus a JSON summary document.

Schema version 1.  Floats are written with shortest round-trip formatting,
so identical runs produce byte-identical files; wall-clock timing goes to
a sidecar file outside the schema.
"""

from __future__ import annotations

import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from .solver import Simulation, cutoff_monitor

__all__ = [
    "SCHEMA_VERSION",
    "TIMESERIES_COLUMNS",
    "write_timeseries",
    "write_snapshots",
    "write_summary",
    "run_to_directory",
    "FAILURE_MARKER",
]

SCHEMA_VERSION = "1"
FAILURE_MARKER = "FAILED"

TIMESERIES_COLUMNS = [
    "t", "dt", "sub_steps",
    "p_min", "p_max", "theta_min", "theta_max", "chi_min", "chi_max",
    "max_chi_rate", "chi_rate_bound",
    "internal_energy", "boundary_rate", "cut_waste_rate", "gravity_work",
    "ledger_defect",
    "dissipation_viscous", "dissipation_plastic", "dissipation_preisach",
    "dissipation_phase",
    "theta_floor", "floor_violation",
    "probe_p", "probe_saturation",
    "iterations_pressure", "iterations_momentum", "iterations_temperature",
    "residual_pressure", "residual_momentum", "residual_temperature",
    "cutoff_active", "max_grad_p_sq",
]


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_timeseries(path, reports):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMESERIES_COLUMNS)
        for r in reports:
            writer.writerow([_fmt(v) for v in (
                r.t, r.dt, r.sub_steps,
                r.p_min, r.p_max, r.theta_min, r.theta_max,
                r.chi_min, r.chi_max,
                r.max_chi_rate, r.chi_rate_bound,
                r.ledger.internal, r.ledger.boundary_rate,
                r.ledger.cut_waste_rate, r.ledger.gravity_work,
                r.ledger.defect,
                r.dissipation_viscous, r.dissipation_plastic,
                r.dissipation_preisach, r.dissipation_phase,
                r.floor_value, r.floor_violation,
                r.probe_p, r.probe_saturation,
                r.iterations_pressure, r.iterations_momentum,
                r.iterations_temperature,
                r.residual_pressure, r.residual_momentum,
                r.residual_temperature,
                any(r.cutoff_flags.values()), r.max_grad_p_sq,
            )])


def write_snapshots(path, mesh, snapshots):
    dim = mesh.dim
    cols = ["t", "node", "x"] + (["y"] if dim == 2 else []) \
        + ["p", "theta", "chi", "u_x"] + (["u_y"] if dim == 2 else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for snap in snapshots:
            u = snap["u"].reshape(mesh.n_nodes, dim)
            for i in range(mesh.n_nodes):
                row = [snap["t"], i, mesh.nodes[i, 0]]
                if dim == 2:
                    row.append(mesh.nodes[i, 1])
                row += [snap["p"][i], snap["theta"][i], snap["chi"][i],
                        u[i, 0]]
                if dim == 2:
                    row.append(u[i, 1])
                writer.writerow([_fmt(v) for v in row])


def to_jsonable(obj):
    """Recursively convert to strict-JSON types.

    Numpy scalars/arrays become plain Python; non-finite floats become
    strings ("inf", "-inf", "nan") so the documents stay parseable by
    strict JSON readers.
    """
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else repr(value)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    return obj


def write_summary(path, summary: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_jsonable(summary), fh, indent=2, sort_keys=True,
                  allow_nan=False)
        fh.write("\n")


def invariant_summary(sim: Simulation, reports) -> dict:
    if not reports:
        return {"steps": 0}
    return {
        "steps": len(reports),
        "chi_min": min(r.chi_min for r in reports),
        "chi_max": max(r.chi_max for r in reports),
        "theta_min": min(r.theta_min for r in reports),
        "max_floor_violation": max(r.floor_violation for r in reports),
        "dissipation_nonnegative": all(
            min(r.dissipation_viscous, r.dissipation_plastic,
                r.dissipation_preisach, r.dissipation_phase) >= 0.0
            for r in reports),
        "max_chi_rate_within_bound": all(
            r.max_chi_rate <= r.chi_rate_bound + 1e-12 for r in reports),
        "total_ledger_defect": sum(abs(r.ledger.defect) for r in reports),
        "total_sub_steps": sum(r.sub_steps for r in reports),
        "cutoff": cutoff_monitor(reports, sim.config),
    }


def run_to_directory(scenario, out_dir, seed=0, force=False) -> dict:
    """Validate, run, and write the full output bundle; returns the summary.

    On validation failure without force, writes the summary with status
    "validation_failed" and runs nothing.  On a step-failure cascade the
    partial outputs are kept and a failure marker file is written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = scenario.validate(seed=seed)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "seed": int(seed),
        "config": scenario.to_dict(),
        "validation": report.to_dict(),
        "status": "pending",
    }
    if not report.passed and not force:
        summary["status"] = "validation_failed"
        summary = to_jsonable(summary)
        write_summary(out / "summary.json", summary)
        return summary

    sim, state = scenario.build_simulation()
    cadence = int(scenario.data.get("output", {}).get("snapshot_every", 0)) \
        or max(1, int(round(sim.config.t_end / sim.config.dt)) // 20)
    t0 = time.perf_counter()
    try:
        final, reports, snapshots = sim.run(state, snapshot_every=cadence)
        status = "completed"
        failure = None
    except Exception as exc:   # noqa: BLE001 - failure bundle keeps the cause
        status = "failed"
        failure = repr(exc)
        reports, snapshots = [], []
    wall = time.perf_counter() - t0

    write_timeseries(out / "timeseries.csv", reports)
    write_snapshots(out / "snapshots.csv", sim.mesh, snapshots)
    summary["status"] = status
    summary["invariants"] = invariant_summary(sim, reports)
    if sim.floor is not None:
        summary["theta_floor_final"] = sim.floor.final
        summary["theta_floor_constant"] = sim.floor.constant
    if failure:
        summary["failure"] = failure
        (out / FAILURE_MARKER).write_text(failure + "\n", encoding="utf-8")
    summary = to_jsonable(summary)
    write_summary(out / "summary.json", summary)
    (out / "timing.txt").write_text(f"wall_seconds {wall:.3f}\n",
                                    encoding="utf-8")
    return summary


def converge_report(scenario, levels: int, seed=0) -> dict:
    """Run dt, dt/2, ... refinements and measure inter-level distances.

    Reports the L2(space, time) Cauchy differences for p, theta, u, the
    ledger-defect totals per level with their observed convergence order,
    and the worst temperature-floor violation per level.
    """
    if levels < 3:
        raise ValueError("need at least 3 refinement levels")
    base = scenario.build_solver_config()
    cadence0 = max(1, int(round(base.t_end / base.dt)) // 25)
    level_data = []
    for lvl in range(levels):
        factor = 2 ** lvl
        sc = scenario.with_solver(dt=base.dt / factor)
        sim, state = sc.build_simulation()
        try:
            _, reports, snaps = sim.run(state,
                                        snapshot_every=cadence0 * factor)
            level_data.append({"sim": sim, "reports": reports,
                               "snaps": snaps, "failed": False})
        except Exception as exc:   # noqa: BLE001
            level_data.append({"failed": True, "error": repr(exc)})

    out = {"schema_version": SCHEMA_VERSION, "name": scenario.name,
           "levels": []}
    diffs = {"p": [], "theta": [], "u": []}
    defects = []
    for lvl, data in enumerate(level_data):
        entry = {"level": lvl, "dt": base.dt / 2 ** lvl,
                 "failed": data["failed"]}
        if data["failed"]:
            entry["error"] = data["error"]
        else:
            reports = data["reports"]
            defects.append(sum(abs(r.ledger.defect) for r in reports))
            entry["ledger_defect"] = defects[-1]
            entry["max_floor_violation"] = max(
                (r.floor_violation for r in reports), default=0.0)
        out["levels"].append(entry)

    ok = [d for d in level_data if not d["failed"]]
    if len(ok) == len(level_data):
        ml = ok[0]["sim"].forms.lumped
        dt_snap = base.t_end / (len(ok[0]["snaps"]) - 1)
        for a, b in zip(level_data[:-1], level_data[1:]):
            for key in diffs:
                total = 0.0
                for sa, sb in zip(a["snaps"], b["snaps"]):
                    d = sa[key] - sb[key]
                    if key == "u":
                        d = d.reshape(len(ml), -1)
                        total += float(np.sum(ml[:, None] * d * d))
                    else:
                        total += float(np.dot(ml, d * d))
                diffs[key].append(np.sqrt(total * dt_snap))
        out["cauchy_differences"] = diffs
        out["cauchy_ratios"] = {
            k: [v[i] / v[i + 1] if v[i + 1] > 0 else None
                for i in range(len(v) - 1)]
            for k, v in diffs.items()}
        if len(defects) >= 2 and min(defects) > 0:
            orders = [np.log2(defects[i] / defects[i + 1])
                      for i in range(len(defects) - 1)]
            out["defect_orders"] = orders
    return to_jsonable(out)
