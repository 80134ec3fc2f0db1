#!/usr/bin/env node
/** render --run <dir> --out <dir>: figure report from one run directory. */

import { loadArtifact } from "./artifact.js";
import { SchemaError } from "./csv.js";
import { renderReport } from "./render.js";

function usage(): never {
  process.stderr.write(
    "usage: frostflow-plots render --run <run-dir> --out <out-dir>\n");
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv.length === 0 || argv[0] !== "render") {
    usage();
  }
  let runDir: string | undefined;
  let outDir: string | undefined;
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (value === undefined) usage();
    if (key === "--run") runDir = value;
    else if (key === "--out") outDir = value;
    else usage();
  }
  if (!runDir || !outDir) usage();
  try {
    const artifact = loadArtifact(runDir);
    const result = renderReport(artifact, outDir);
    process.stdout.write(
      `rendered ${result.figures.length} figures to ${outDir}\n`);
    process.stdout.write(
      `hysteresis loop area: ${result.loopArea.toExponential(6)}\n`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`schema error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly = process.argv[1] !== undefined
  && import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
