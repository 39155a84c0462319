import { readFileSync } from "node:fs";
import { describe, expect, it, vi } from "vitest";
import {
  polylinePoints,
  renderConvergence,
  renderEffectivity,
} from "../src/chart.js";
import { column, parseRecordsCsv, totalError } from "../src/csv.js";
import { fitSlope } from "../src/slope.js";

const FIXTURE = new URL("./fixtures/records_example1_p14.csv", import.meta.url);

function fixtureSeries() {
  const table = parseRecordsCsv(readFileSync(FIXTURE, "utf8"));
  const ndof = column(table, "ndof");
  return {
    estimator: { name: "estimator", x: ndof, y: column(table, "estimator") },
    error: { name: "error", x: ndof, y: totalError(table) },
    effectivity: {
      name: "effectivity",
      x: ndof,
      y: column(table, "effectivity"),
    },
  };
}

describe("convergence chart", () => {
  it("renders the solver fixture with estimator and error curves", () => {
    const s = fixtureSeries();
    const svg = renderConvergence([s.estimator, s.error], { refSlopes: [-1] });
    expect(svg).toContain("<svg");
    expect(svg).toContain('id="series-estimator"');
    expect(svg).toContain('id="series-error"');
    expect(svg).toContain('id="ref-slope--1"');
    expect(svg).toContain("Ndof^-1");
  });

  it("renders a single series without reference lines", () => {
    const svg = renderConvergence(
      [{ name: "only", x: [10, 100, 1000], y: [1, 0.5, 0.25] }],
      {},
    );
    expect(svg).toContain('id="series-only"');
    expect(svg).not.toContain("ref-slope");
  });

  it("draws an exact power law parallel to its reference line", () => {
    // synthetic data C * Ndof^{-1}: the plotted polyline must have the
    // same pixel slope as the dashed guide anchored at its last point
    const x = [1e2, 3e2, 1e3, 3e3, 1e4, 1e5];
    const y = x.map((v) => 50.0 / v);
    const svg = renderConvergence([{ name: "law", x, y }], { refSlopes: [-1] });
    const data = polylinePoints(svg, "series-law");
    const ref = polylinePoints(svg, "ref-slope--1");
    const dataSlope = fitSlope(
      data.map((p) => p[0]),
      data.map((p) => p[1]),
    );
    const refSlope = fitSlope(
      ref.map((p) => p[0]),
      ref.map((p) => p[1]),
    );
    expect(Math.abs(dataSlope - refSlope)).toBeLessThan(1e-3);
    // and the guide is anchored at the final data point
    const last = data[data.length - 1];
    const refEnd = ref[ref.length - 1];
    expect(Math.hypot(last[0] - refEnd[0], last[1] - refEnd[1])).toBeLessThan(
      0.01,
    );
  });

  it("skips non-finite points with a warning", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    const svg = renderConvergence(
      [{ name: "gappy", x: [10, 100, 1000], y: [1, NaN, 0.1] }],
      {},
    );
    expect(warn).toHaveBeenCalledOnce();
    expect(polylinePoints(svg, "series-gappy")).toHaveLength(2);
    warn.mockRestore();
  });

  it("fails cleanly when nothing is plottable", () => {
    expect(() =>
      renderConvergence([{ name: "empty", x: [1, 2], y: [NaN, -1] }]),
    ).toThrow(/nothing to plot/);
  });
});

describe("effectivity chart", () => {
  it("renders the fixture effectivity column", () => {
    const s = fixtureSeries();
    const svg = renderEffectivity([s.effectivity]);
    expect(svg).toContain('id="series-effectivity"');
    const pts = polylinePoints(svg, "series-effectivity");
    expect(pts.length).toBe(s.effectivity.x.length);
  });

  it("draws a constant column as a horizontal line", () => {
    const svg = renderEffectivity([
      { name: "flat", x: [10, 100, 1000], y: [7, 7, 7] },
    ]);
    const pts = polylinePoints(svg, "series-flat");
    const ys = new Set(pts.map((p) => p[1]));
    expect(ys.size).toBe(1);
  });

  it("skips a NaN entry with a warning", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    const svg = renderEffectivity([
      { name: "gappy", x: [10, 100, 1000], y: [7, NaN, 8] },
    ]);
    expect(warn).toHaveBeenCalledOnce();
    expect(polylinePoints(svg, "series-gappy")).toHaveLength(2);
    warn.mockRestore();
  });
});
