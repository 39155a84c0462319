/**
 * SVG figure generation without a DOM: convergence histories on log-log
 * axes with reference-slope guide lines, and effectivity histories on a
 * semilog-x axis. The output is a standalone SVG document; series
 * polylines and reference lines carry stable ids so tests can check
 * geometric properties (e.g. that a power-law series runs parallel to
 * its guide line) straight from the markup.
 */

export interface Series {
  name: string;
  x: number[];
  y: number[];
}

export interface ChartOptions {
  title?: string;
  width?: number;
  height?: number;
  refSlopes?: number[];
  xLabel?: string;
  yLabel?: string;
}

const COLORS = ["#1f6fb4", "#c23b22", "#2e8b57", "#8956a8", "#b8860b"];
const MARGIN = { left: 64, right: 24, top: 34, bottom: 46 };

interface Scale {
  (v: number): number;
}

function logTicks(min: number, max: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(min) - 1e-9); e <= Math.floor(Math.log10(max) + 1e-9); e++) {
    ticks.push(10 ** e);
  }
  return ticks;
}

function linTicks(min: number, max: number, n = 6): number[] {
  const span = max - min;
  const step = 10 ** Math.floor(Math.log10(span / n));
  const mult = [1, 2, 5, 10].find((m) => span / (m * step) <= n) ?? 10;
  const s = mult * step;
  const ticks: number[] = [];
  for (let v = Math.ceil(min / s) * s; v <= max + 1e-12 * span; v += s) {
    ticks.push(v);
  }
  return ticks;
}

function fmt(v: number): string {
  if (v !== 0 && (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3)) {
    const e = Math.floor(Math.log10(Math.abs(v)));
    const m = v / 10 ** e;
    return Math.abs(m - 1) < 1e-9 ? `1e${e}` : `${m.toPrecision(2)}e${e}`;
  }
  return `${Number(v.toPrecision(4))}`;
}

function cleanSeries(series: Series, logY: boolean): Series {
  const x: number[] = [];
  const y: number[] = [];
  let skipped = 0;
  for (let i = 0; i < series.x.length; i++) {
    const ok =
      Number.isFinite(series.x[i]) &&
      Number.isFinite(series.y[i]) &&
      series.x[i] > 0 &&
      (!logY || series.y[i] > 0);
    if (ok) {
      x.push(series.x[i]);
      y.push(series.y[i]);
    } else {
      skipped++;
    }
  }
  if (skipped > 0) {
    console.warn(
      `series "${series.name}": skipped ${skipped} non-plottable point(s)`,
    );
  }
  return { name: series.name, x, y };
}

function svgHeader(width: number, height: number, title?: string): string[] {
  const lines = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif" font-size="12">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
  ];
  if (title) {
    lines.push(
      `<text x="${width / 2}" y="20" text-anchor="middle" font-size="14">${title}</text>`,
    );
  }
  return lines;
}

function axes(
  sx: Scale,
  sy: Scale,
  xTicks: number[],
  yTicks: number[],
  width: number,
  height: number,
  xLabel: string,
  yLabel: string,
): string[] {
  const x0 = MARGIN.left;
  const x1 = width - MARGIN.right;
  const y0 = height - MARGIN.bottom;
  const y1 = MARGIN.top;
  const out: string[] = [];
  out.push(
    `<path d="M ${x0} ${y1} L ${x0} ${y0} L ${x1} ${y0}" fill="none" stroke="black" stroke-width="1"/>`,
  );
  for (const t of xTicks) {
    const px = sx(t);
    out.push(
      `<line x1="${px.toFixed(2)}" y1="${y0}" x2="${px.toFixed(2)}" y2="${y0 + 5}" stroke="black"/>`,
      `<text x="${px.toFixed(2)}" y="${y0 + 18}" text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of yTicks) {
    const py = sy(t);
    out.push(
      `<line x1="${x0 - 5}" y1="${py.toFixed(2)}" x2="${x0}" y2="${py.toFixed(2)}" stroke="black"/>`,
      `<text x="${x0 - 8}" y="${(py + 4).toFixed(2)}" text-anchor="end">${fmt(t)}</text>`,
    );
  }
  out.push(
    `<text x="${(x0 + x1) / 2}" y="${height - 8}" text-anchor="middle">${xLabel}</text>`,
    `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" transform="rotate(-90 16 ${(y0 + y1) / 2})">${yLabel}</text>`,
  );
  return out;
}

function polyline(
  id: string,
  xs: number[],
  ys: number[],
  sx: Scale,
  sy: Scale,
  color: string,
  dashed = false,
): string {
  const pts = xs
    .map((x, i) => `${sx(x).toFixed(3)},${sy(ys[i]).toFixed(3)}`)
    .join(" ");
  const dash = dashed ? ' stroke-dasharray="6 4"' : "";
  return `<polyline id="${id}" fill="none" stroke="${color}" stroke-width="1.5"${dash} points="${pts}"/>`;
}

/** Log-log convergence chart with reference slope lines anchored at the
 * last point of the first series. */
export function renderConvergence(
  seriesIn: Series[],
  options: ChartOptions = {},
): string {
  const width = options.width ?? 560;
  const height = options.height ?? 420;
  const refSlopes = options.refSlopes ?? [];
  const series = seriesIn.map((s) => cleanSeries(s, true)).filter((s) => s.x.length > 0);
  if (series.length === 0) {
    throw new Error("nothing to plot: every series is empty");
  }
  const allX = series.flatMap((s) => s.x);
  const allY = series.flatMap((s) => s.y);
  let xMin = Math.min(...allX);
  let xMax = Math.max(...allX);
  let yMin = Math.min(...allY);
  let yMax = Math.max(...allY);

  // reference lines span the data range, anchored at the last point
  const anchor = {
    x: series[0].x[series[0].x.length - 1],
    y: series[0].y[series[0].y.length - 1],
  };
  const refLines = refSlopes.map((slope) => {
    const xStart = xMin;
    const yStart = anchor.y * (xStart / anchor.x) ** slope;
    yMin = Math.min(yMin, yStart, anchor.y);
    yMax = Math.max(yMax, yStart, anchor.y);
    return { slope, x: [xStart, anchor.x], y: [yStart, anchor.y] };
  });

  if (xMin === xMax) xMax = xMin * 10;
  if (yMin === yMax) yMax = yMin * 10;
  const sx: Scale = (v) =>
    MARGIN.left +
    ((Math.log10(v) - Math.log10(xMin)) / (Math.log10(xMax) - Math.log10(xMin))) *
      (width - MARGIN.left - MARGIN.right);
  const sy: Scale = (v) =>
    height -
    MARGIN.bottom -
    ((Math.log10(v) - Math.log10(yMin)) / (Math.log10(yMax) - Math.log10(yMin))) *
      (height - MARGIN.top - MARGIN.bottom);

  const out = svgHeader(width, height, options.title);
  out.push(
    ...axes(
      sx,
      sy,
      logTicks(xMin, xMax),
      logTicks(yMin, yMax),
      width,
      height,
      options.xLabel ?? "Ndof",
      options.yLabel ?? "value",
    ),
  );
  refLines.forEach((ref) => {
    out.push(polyline(`ref-slope-${ref.slope}`, ref.x, ref.y, sx, sy, "#555555", true));
    out.push(
      `<text x="${(sx(ref.x[0]) + 6).toFixed(1)}" y="${(sy(ref.y[0]) - 6).toFixed(1)}" fill="#555555">Ndof^${ref.slope}</text>`,
    );
  });
  series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    out.push(polyline(`series-${s.name}`, s.x, s.y, sx, sy, color));
    out.push(
      `<text x="${width - MARGIN.right - 8}" y="${MARGIN.top + 16 * (i + 1)}" text-anchor="end" fill="${color}">${s.name}</text>`,
    );
  });
  out.push("</svg>");
  return out.join("\n");
}

/** Effectivity chart: log10 horizontal axis, linear vertical axis. */
export function renderEffectivity(
  seriesIn: Series[],
  options: ChartOptions = {},
): string {
  const width = options.width ?? 560;
  const height = options.height ?? 420;
  const series = seriesIn.map((s) => cleanSeries(s, false)).filter((s) => s.x.length > 0);
  if (series.length === 0) {
    throw new Error("nothing to plot: every series is empty");
  }
  const allX = series.flatMap((s) => s.x);
  const allY = series.flatMap((s) => s.y);
  let xMin = Math.min(...allX);
  let xMax = Math.max(...allX);
  if (xMin === xMax) xMax = xMin * 10;
  const pad = 0.1 * (Math.max(...allY) - Math.min(...allY) || 1);
  const yMin = Math.min(...allY) - pad;
  const yMax = Math.max(...allY) + pad;

  const sx: Scale = (v) =>
    MARGIN.left +
    ((Math.log10(v) - Math.log10(xMin)) / (Math.log10(xMax) - Math.log10(xMin))) *
      (width - MARGIN.left - MARGIN.right);
  const sy: Scale = (v) =>
    height -
    MARGIN.bottom -
    ((v - yMin) / (yMax - yMin)) * (height - MARGIN.top - MARGIN.bottom);

  const out = svgHeader(width, height, options.title);
  out.push(
    ...axes(
      sx,
      sy,
      logTicks(xMin, xMax),
      linTicks(yMin, yMax),
      width,
      height,
      options.xLabel ?? "Ndof",
      options.yLabel ?? "effectivity",
    ),
  );
  series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    out.push(polyline(`series-${s.name}`, s.x, s.y, sx, sy, color));
  });
  out.push("</svg>");
  return out.join("\n");
}

/** Extract the pixel coordinates of a polyline by id (test support). */
export function polylinePoints(svg: string, id: string): Array<[number, number]> {
  const match = svg.match(new RegExp(`<polyline id="${id}"[^>]*points="([^"]*)"`));
  if (!match) {
    throw new Error(`no polyline with id "${id}"`);
  }
  return match[1]
    .split(" ")
    .filter((p) => p.length > 0)
    .map((pair) => {
      const [x, y] = pair.split(",").map(Number);
      return [x, y] as [number, number];
    });
}
