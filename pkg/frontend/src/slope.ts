/** Least-squares slope of log10(y) against log10(x), skipping pairs that
 * are not finite and positive. Used both for reporting rates and for the
 * pixel-level parallelism check in the chart tests. */
export function fitLogLogSlope(x: number[], y: number[]): number {
  const lx: number[] = [];
  const ly: number[] = [];
  for (let i = 0; i < x.length; i++) {
    if (Number.isFinite(x[i]) && Number.isFinite(y[i]) && x[i] > 0 && y[i] > 0) {
      lx.push(Math.log10(x[i]));
      ly.push(Math.log10(y[i]));
    }
  }
  return fitSlope(lx, ly);
}

/** Plain least-squares slope of y against x. */
export function fitSlope(x: number[], y: number[]): number {
  if (x.length < 2) {
    throw new Error("slope fit needs at least two points");
  }
  const n = x.length;
  const mx = x.reduce((a, b) => a + b, 0) / n;
  const my = y.reduce((a, b) => a + b, 0) / n;
  let num = 0;
  let den = 0;
  for (let i = 0; i < n; i++) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  if (den === 0) {
    throw new Error("slope fit is degenerate: all abscissae equal");
  }
  return num / den;
}
