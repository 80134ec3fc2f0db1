/** Loading and schema-checking of one run directory. */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { SchemaError, Table, numericColumn, parseCsv } from "./csv.js";

export const SUPPORTED_SCHEMA = "1";

export interface RunArtifact {
  runDir: string;
  summary: Record<string, unknown>;
  timeseries: Table;
  snapshots: Table;
}

const REQUIRED_TIMESERIES = [
  "t", "dt", "theta_min", "theta_max", "chi_min", "chi_max",
  "internal_energy", "boundary_rate", "cut_waste_rate", "ledger_defect",
  "theta_floor", "probe_p", "probe_saturation",
];

const REQUIRED_SNAPSHOTS = ["t", "node", "x", "p", "theta", "chi"];

export function loadArtifact(runDir: string): RunArtifact {
  let summaryText: string;
  try {
    summaryText = readFileSync(join(runDir, "summary.json"), "utf-8");
  } catch {
    throw new SchemaError(`no summary.json in ${runDir}`);
  }
  const summary = JSON.parse(summaryText) as Record<string, unknown>;
  const version = summary["schema_version"];
  if (version !== SUPPORTED_SCHEMA) {
    throw new SchemaError(
      `schema version ${String(version)} is not supported ` +
      `(expected ${SUPPORTED_SCHEMA})`,
    );
  }
  const timeseries = parseCsv(
    readFileSync(join(runDir, "timeseries.csv"), "utf-8"));
  const snapshots = parseCsv(
    readFileSync(join(runDir, "snapshots.csv"), "utf-8"));
  for (const name of REQUIRED_TIMESERIES) {
    if (!timeseries.header.includes(name)) {
      throw new SchemaError(`timeseries.csv lacks column '${name}'`);
    }
  }
  for (const name of REQUIRED_SNAPSHOTS) {
    if (!snapshots.header.includes(name)) {
      throw new SchemaError(`snapshots.csv lacks column '${name}'`);
    }
  }
  return { runDir, summary, timeseries, snapshots };
}

/** Shoelace area of a planar polyline, implicitly closed. */
export function loopArea(xs: number[], ys: number[]): number {
  if (xs.length !== ys.length) {
    throw new SchemaError("loop coordinates must have equal length");
  }
  let twice = 0;
  const n = xs.length;
  for (let i = 0; i < n; i += 1) {
    const j = (i + 1) % n;
    twice += xs[i] * ys[j] - xs[j] * ys[i];
  }
  return Math.abs(twice) / 2;
}

export interface SnapshotSlice {
  t: number;
  x: number[];
  chi: number[];
}

/** Group the long-format snapshot table into per-time profiles. */
export function snapshotSlices(snapshots: Table): SnapshotSlice[] {
  const t = numericColumn(snapshots, "t");
  const x = numericColumn(snapshots, "x");
  const chi = numericColumn(snapshots, "chi");
  const slices = new Map<number, SnapshotSlice>();
  for (let i = 0; i < t.length; i += 1) {
    let slice = slices.get(t[i]);
    if (!slice) {
      slice = { t: t[i], x: [], chi: [] };
      slices.set(t[i], slice);
    }
    slice.x.push(x[i]);
    slice.chi.push(chi[i]);
  }
  return [...slices.values()].sort((a, b) => a.t - b.t);
}
