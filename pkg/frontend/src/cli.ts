#!/usr/bin/env node
/**
 * villani-plot --kind <lambda_sweep|training_curve|rate_fit> --in <csv> --out <svg>
 *
 * Renders one villani-net CSV artifact to a standalone SVG file. The input
 * is opened read-only; the output is a pure function of the input bytes, so
 * reruns are byte-identical. Any problem (unknown kind, unreadable or empty
 * input, missing columns, unusable series) prints one error line and exits
 * nonzero.
 */

import { mkdirSync, realpathSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";
import { readTable } from "./csv.js";
import { PLOT_KINDS, REQUIRED_COLUMNS, render, type PlotKind } from "./plots.js";

const USAGE = `usage: villani-plot --kind <${PLOT_KINDS.join("|")}> --in <csv> --out <svg>`;

export function main(argv: string[]): number {
  try {
    const { values } = parseArgs({
      args: argv,
      options: {
        kind: { type: "string" },
        in: { type: "string" },
        out: { type: "string" },
      },
      allowPositionals: false,
    });
    const kind = values.kind;
    const input = values.in;
    const output = values.out;
    if (kind === undefined || input === undefined || output === undefined) {
      throw new Error(`--kind, --in and --out are all required\n${USAGE}`);
    }
    if (!PLOT_KINDS.includes(kind as PlotKind)) {
      throw new Error(`unknown kind "${kind}"; expected one of ${PLOT_KINDS.join(", ")}`);
    }
    const rows = readTable(input, REQUIRED_COLUMNS[kind as PlotKind]);
    const svg = render(kind as PlotKind, rows);
    mkdirSync(dirname(output), { recursive: true });
    writeFileSync(output, svg);
    console.log(output);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

function invokedAsScript(): boolean {
  if (process.argv[1] === undefined) {
    return false;
  }
  try {
    return import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
  } catch {
    return false;
  }
}

if (invokedAsScript()) {
  process.exit(main(process.argv.slice(2)));
}
