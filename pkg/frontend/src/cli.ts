/**
 * Command line entry point:
 *
 *   plots convergence --csv records.csv --out figure.svg
 *         [--series estimator,error] [--ref-slopes -1,-0.45] [--title ...]
 *   plots effectivity --csv records.csv --out figure.svg
 *   plots mesh --vtk mesh_12.vtk --out mesh.svg [--shade eta_pow]
 *
 * Output is an SVG image written to --out.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { column, parseRecordsCsv, totalError } from "./csv.js";
import { renderConvergence, renderEffectivity, Series } from "./chart.js";
import { parseVtk, renderMesh } from "./vtk.js";

interface Args {
  command: string;
  options: Map<string, string>;
}

function parseArgs(argv: string[]): Args {
  if (argv.length === 0) {
    throw new Error(
      "usage: plots convergence|effectivity|mesh --csv|--vtk <path> --out <path>",
    );
  }
  const [command, ...rest] = argv;
  const options = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i];
    if (!key.startsWith("--") || i + 1 >= rest.length) {
      throw new Error(`malformed option "${key}"`);
    }
    options.set(key.slice(2), rest[i + 1]);
  }
  return { command, options };
}

function required(args: Args, name: string): string {
  const value = args.options.get(name);
  if (value === undefined) {
    throw new Error(`missing required option --${name}`);
  }
  return value;
}

function seriesFromCsv(path: string, names: string[]): Series[] {
  const table = parseRecordsCsv(readFileSync(path, "utf8"));
  const ndof = column(table, "ndof");
  return names.map((name) => ({
    name,
    x: ndof,
    y: name === "error" ? totalError(table) : column(table, name),
  }));
}

function writeImage(path: string, svg: string): void {
  if (!path.endsWith(".svg")) {
    console.warn(`writing SVG markup to "${path}" despite its extension`);
  }
  writeFileSync(path, svg + "\n");
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
    const out = required(args, "out");
    if (args.command === "convergence") {
      const names = (args.options.get("series") ?? "estimator,error").split(",");
      const refSlopes = (args.options.get("ref-slopes") ?? "-1")
        .split(",")
        .map(Number);
      const series = seriesFromCsv(required(args, "csv"), names);
      const usable = series.filter((s) =>
        s.y.some((v) => Number.isFinite(v) && v > 0),
      );
      if (usable.length === 0) {
        throw new Error("no plottable series in the csv");
      }
      writeImage(
        out,
        renderConvergence(usable, {
          refSlopes,
          title: args.options.get("title") ?? "Convergence history",
          yLabel: "estimator / error",
        }),
      );
    } else if (args.command === "effectivity") {
      const series = seriesFromCsv(required(args, "csv"), ["effectivity"]);
      writeImage(
        out,
        renderEffectivity(series, {
          title: args.options.get("title") ?? "Effectivity index",
        }),
      );
    } else if (args.command === "mesh") {
      const path = args.options.get("vtk") ?? required(args, "csv");
      const mesh = parseVtk(readFileSync(path, "utf8"));
      writeImage(
        out,
        renderMesh(mesh, { shadeBy: args.options.get("shade") }),
      );
    } else {
      throw new Error(`unknown subcommand "${args.command}"`);
    }
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
