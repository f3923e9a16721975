#!/usr/bin/env node
/**
 * plot cumulative --in rollouts.csv [--in more.csv] --out fig.png [--bound-L 1e6]
 * plot training   --in curve.csv   [--in more.csv] --out fig.png --bound-L 1e5
 */

import { parseArgs } from "node:util";
import { plotCumulative, plotTraining } from "./figure.js";

const USAGE = `usage:
  plot cumulative --in rollouts.csv [--in more.csv] --out fig.png [--bound-L 1e6]
  plot training   --in curve.csv [--in more.csv] --out fig.png --bound-L 1e5`;

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command === undefined || command === "--help" || command === "-h") {
    console.log(USAGE);
    return command === undefined ? 2 : 0;
  }
  if (command !== "cumulative" && command !== "training") {
    console.error(`unknown command ${command}\n${USAGE}`);
    return 2;
  }

  let values;
  try {
    ({ values } = parseArgs({
      args: rest,
      options: {
        in: { type: "string", multiple: true },
        out: { type: "string" },
        "bound-L": { type: "string" },
      },
    }));
  } catch (err) {
    console.error(`${(err as Error).message}\n${USAGE}`);
    return 2;
  }

  const inputs = values.in ?? [];
  const out = values.out;
  if (inputs.length === 0 || out === undefined) {
    console.error(`--in and --out are required\n${USAGE}`);
    return 2;
  }
  let boundL: number | undefined;
  if (values["bound-L"] !== undefined) {
    boundL = Number(values["bound-L"]);
    if (!Number.isFinite(boundL) || boundL < 1) {
      console.error(`--bound-L must be a number >= 1, got ${values["bound-L"]}`);
      return 2;
    }
  }

  try {
    if (command === "cumulative") {
      plotCumulative({ inputs, out, boundL });
    } else {
      if (boundL === undefined) {
        console.error(`training plots need --bound-L (the training-time L)\n${USAGE}`);
        return 2;
      }
      plotTraining({ inputs, out, boundL });
    }
  } catch (err) {
    console.error((err as Error).message);
    return 1;
  }
  console.log(`wrote ${out}`);
  return 0;
}

// invoke only when executed directly, not when imported by tests
import { fileURLToPath } from "node:url";
import { argv } from "node:process";
if (argv[1] !== undefined && fileURLToPath(import.meta.url) === argv[1]) {
  process.exitCode = main(argv.slice(2));
}
