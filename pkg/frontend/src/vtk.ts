/**
 * Minimal reader for the solver's legacy ASCII VTK meshes (triangle
 * cells, optional CELL_DATA scalars) and an SVG renderer for mesh
 * snapshots, optionally shaded by a cell field.
 */

export interface VtkMesh {
  points: Array<[number, number]>;
  cells: Array<[number, number, number]>;
  cellData: Record<string, number[]>;
}

export function parseVtk(text: string): VtkMesh {
  const tokens = text.split(/\s+/).filter((t) => t.length > 0);
  let i = 0;
  const next = () => tokens[i++];
  const points: Array<[number, number]> = [];
  const cells: Array<[number, number, number]> = [];
  const cellData: Record<string, number[]> = {};
  while (i < tokens.length) {
    const tok = next();
    if (tok === "POINTS") {
      const n = Number(next());
      next(); // dtype
      for (let k = 0; k < n; k++) {
        const x = Number(next());
        const y = Number(next());
        next(); // z
        points.push([x, y]);
      }
    } else if (tok === "CELLS") {
      const n = Number(next());
      next(); // total size
      for (let k = 0; k < n; k++) {
        const arity = Number(next());
        if (arity !== 3) {
          throw new Error(`only triangle cells supported, got arity ${arity}`);
        }
        cells.push([Number(next()), Number(next()), Number(next())]);
      }
    } else if (tok === "SCALARS") {
      const name = next();
      next(); // dtype
      next(); // components
      next(); // LOOKUP_TABLE
      next(); // default
      const values: number[] = [];
      while (i < tokens.length && /^[-+0-9.eEnan]+$/.test(tokens[i]) && values.length < cells.length) {
        values.push(Number(next()));
      }
      if (Object.keys(cellData).length === 0 && values.length === cells.length) {
        cellData[name] = values;
      }
    }
  }
  if (points.length === 0 || cells.length === 0) {
    throw new Error("VTK file has no points or no triangle cells");
  }
  return { points, cells, cellData };
}

function ramp(t: number): string {
  // dark blue to warm yellow
  const r = Math.round(30 + 225 * t);
  const g = Math.round(40 + 180 * t);
  const b = Math.round(120 * (1 - t) + 60);
  return `rgb(${r},${g},${b})`;
}

export function renderMesh(
  mesh: VtkMesh,
  options: { width?: number; shadeBy?: string; title?: string } = {},
): string {
  const width = options.width ?? 560;
  const xs = mesh.points.map((p) => p[0]);
  const ys = mesh.points.map((p) => p[1]);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const pad = 12;
  const scale = (width - 2 * pad) / Math.max(xMax - xMin, yMax - yMin);
  const height = Math.ceil((yMax - yMin) * scale + 2 * pad);
  const px = (x: number) => pad + (x - xMin) * scale;
  const py = (y: number) => height - pad - (y - yMin) * scale;

  const out = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
  ];
  const shade = options.shadeBy ? mesh.cellData[options.shadeBy] : undefined;
  let lo = 0;
  let hi = 1;
  if (shade) {
    const finite = shade.filter((v) => Number.isFinite(v));
    lo = Math.min(...finite);
    hi = Math.max(...finite);
    if (hi === lo) hi = lo + 1;
  }
  mesh.cells.forEach((cell, idx) => {
    const pts = cell
      .map((v) => `${px(mesh.points[v][0]).toFixed(2)},${py(mesh.points[v][1]).toFixed(2)}`)
      .join(" ");
    const fill = shade ? ramp((shade[idx] - lo) / (hi - lo)) : "none";
    out.push(
      `<polygon points="${pts}" fill="${fill}" stroke="#333333" stroke-width="0.4"/>`,
    );
  });
  out.push("</svg>");
  return out.join("\n");
}
