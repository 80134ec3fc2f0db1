/** The four figure families of a run report, plus the index page. */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { RunArtifact, loopArea, snapshotSlices } from "./artifact.js";
import { numericColumn } from "./csv.js";
import { lineChart } from "./svg.js";

export interface ReportResult {
  figures: { file: string; caption: string }[];
  loopArea: number;
}

function cumulative(rates: number[], dts: number[]): number[] {
  const out: number[] = [];
  let acc = 0;
  for (let i = 0; i < rates.length; i += 1) {
    acc += rates[i] * dts[i];
    out.push(acc);
  }
  return out;
}

export function renderReport(artifact: RunArtifact,
  outDir: string): ReportResult {
  mkdirSync(outDir, { recursive: true });
  const ts = artifact.timeseries;
  const t = numericColumn(ts, "t");
  const dt = numericColumn(ts, "dt");
  const figures: { file: string; caption: string }[] = [];

  const ledgerSvg = lineChart(
    [
      { label: "internal energy", x: t, y: numericColumn(ts, "internal_energy") },
      {
        label: "boundary work (cum.)", x: t,
        y: cumulative(numericColumn(ts, "boundary_rate"), dt),
      },
      {
        label: "cut-off waste (cum.)", x: t,
        y: cumulative(numericColumn(ts, "cut_waste_rate"), dt),
      },
      {
        label: "|defect| (cum.)", x: t,
        y: cumulative(
          numericColumn(ts, "ledger_defect").map(Math.abs),
          t.map(() => 1)),
      },
    ],
    { title: "Energy ledger", xLabel: "t", yLabel: "energy" },
  );
  writeFileSync(join(outDir, "energy_ledger.svg"), ledgerSvg);
  figures.push({
    file: "energy_ledger.svg",
    caption: "Internal energy against accumulated boundary work, cut-off " +
      "waste, and the accumulated ledger defect.",
  });

  const floorSvg = lineChart(
    [
      { label: "min temperature", x: t, y: numericColumn(ts, "theta_min") },
      { label: "comparison floor", x: t, y: numericColumn(ts, "theta_floor") },
    ],
    { title: "Temperature floor", xLabel: "t", yLabel: "temperature" },
  );
  writeFileSync(join(outDir, "temperature_floor.svg"), floorSvg);
  figures.push({
    file: "temperature_floor.svg",
    caption: "Minimum temperature stays above the comparison trajectory.",
  });

  const probeP = numericColumn(ts, "probe_p");
  const probeSat = numericColumn(ts, "probe_saturation");
  const area = loopArea(probeP, probeSat);
  const loopSvg = lineChart(
    [{ label: "probe node", x: probeP, y: probeSat }],
    {
      title: `Capillary hysteresis loop (area ${area.toExponential(3)})`,
      xLabel: "pressure", yLabel: "saturation",
    },
  );
  writeFileSync(join(outDir, "hysteresis_loop.svg"), loopSvg);
  figures.push({
    file: "hysteresis_loop.svg",
    caption: `Pressure-saturation path at the probe node; enclosed ` +
      `area ${area.toExponential(6)}.`,
  });

  const slices = snapshotSlices(artifact.snapshots);
  const keep = Math.max(1, Math.floor(slices.length / 8));
  const shown = slices.filter((_, k) => k % keep === 0 ||
    k === slices.length - 1);
  const chiSvg = lineChart(
    shown.map((s) => ({
      label: `t = ${Number(s.t.toPrecision(4))}`, x: s.x, y: s.chi,
    })),
    { title: "Water fraction profiles", xLabel: "x", yLabel: "chi" },
  );
  writeFileSync(join(outDir, "phase_fraction.svg"), chiSvg);
  figures.push({
    file: "phase_fraction.svg",
    caption: "Liquid fraction across the domain at successive times.",
  });

  const name = String(artifact.summary["name"] ?? "run");
  const items = figures
    .map((f) => `    <figure>\n      <img src="${f.file}" alt="${f.file}"/>` +
      `\n      <figcaption>${f.caption}</figcaption>\n    </figure>`)
    .join("\n");
  const html = `<!DOCTYPE html>
<html lang="en">
  <head>
    <meta charset="utf-8"/>
    <title>Run report: ${name}</title>
    <style>
      body { font-family: sans-serif; max-width: 820px; margin: 2em auto; }
      figure { margin: 2em 0; }
      figcaption { color: #444; font-size: 0.92em; margin-top: 0.4em; }
      img { max-width: 100%; border: 1px solid #ddd; }
    </style>
  </head>
  <body>
    <h1>Run report: ${name}</h1>
    <p>Hysteresis loop area at the probe node: ${area.toExponential(6)}</p>
${items}
  </body>
</html>
`;
  writeFileSync(join(outDir, "index.html"), html);
  return { figures, loopArea: area };
}
