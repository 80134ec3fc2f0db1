import { cpSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { loadArtifact, loopArea, snapshotSlices } from "../src/artifact.js";
import { SchemaError } from "../src/csv.js";

const FIXTURES = join(__dirname, "fixtures");

describe("loopArea", () => {
  it("unit square has area one", () => {
    expect(loopArea([0, 1, 1, 0], [0, 0, 1, 1])).toBeCloseTo(1.0, 12);
  });

  it("degenerate point cloud has area zero", () => {
    expect(loopArea([0.3, 0.3, 0.3], [0.5, 0.5, 0.5])).toBe(0);
  });

  it("is orientation independent", () => {
    expect(loopArea([0, 0, 1, 1], [0, 1, 1, 0])).toBeCloseTo(1.0, 12);
  });
});

describe("loadArtifact", () => {
  it("loads a complete run directory", () => {
    const artifact = loadArtifact(join(FIXTURES, "freeze_thaw"));
    expect(artifact.summary["schema_version"]).toBe("1");
    expect(artifact.timeseries.rows.length).toBeGreaterThan(100);
    const slices = snapshotSlices(artifact.snapshots);
    expect(slices.length).toBeGreaterThan(3);
    expect(slices[0].t).toBe(0);
  });

  it("refuses a mismatched schema version", () => {
    const dir = mkdtempSync(join(tmpdir(), "ffplots-"));
    cpSync(join(FIXTURES, "zero_forcing"), dir, { recursive: true });
    const summary = JSON.parse(
      JSON.stringify({ schema_version: "999", name: "zero" }));
    writeFileSync(join(dir, "summary.json"), JSON.stringify(summary));
    expect(() => loadArtifact(dir)).toThrow(SchemaError);
    expect(() => loadArtifact(dir)).toThrow(/999/);
  });

  it("reports truncated tables as schema errors", () => {
    const dir = mkdtempSync(join(tmpdir(), "ffplots-"));
    cpSync(join(FIXTURES, "zero_forcing"), dir, { recursive: true });
    writeFileSync(join(dir, "timeseries.csv"), "t,dt\n0.1\n");
    expect(() => loadArtifact(dir)).toThrow(SchemaError);
  });

  it("reports missing columns by name", () => {
    const dir = mkdtempSync(join(tmpdir(), "ffplots-"));
    cpSync(join(FIXTURES, "zero_forcing"), dir, { recursive: true });
    writeFileSync(join(dir, "timeseries.csv"), "t,dt\n0.1,0.1\n");
    expect(() => loadArtifact(dir)).toThrow(/theta_min/);
  });
});
