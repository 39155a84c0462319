import { describe, expect, it } from "vitest";
import { fitLogLogSlope, fitSlope } from "../src/slope.js";

describe("slope fitting", () => {
  it("recovers an exact power law", () => {
    const x = [1e2, 1e3, 1e4, 1e5];
    const y = x.map((v) => 7.5 * v ** -0.45);
    expect(fitLogLogSlope(x, y)).toBeCloseTo(-0.45, 12);
  });

  it("ignores non-positive and non-finite pairs", () => {
    const x = [10, 100, 1000, 10000];
    const y = [1, NaN, 0.01, -5];
    expect(fitLogLogSlope(x, y)).toBeCloseTo(-1.0, 12);
  });

  it("needs two usable points", () => {
    expect(() => fitLogLogSlope([10], [1])).toThrow();
    expect(() => fitSlope([1, 1], [0, 1])).toThrow(/degenerate/);
  });
});
