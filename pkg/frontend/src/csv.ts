/**
 * Reader for the solver's records.csv: one row per adaptive iteration,
 * columns iteration, ndof, estimator, error_grad, error_pressure,
 * effectivity. Missing quantities (runs without an exact solution) are
 * written as "nan" and surface here as NaN.
 */

export interface RecordsTable {
  columns: string[];
  rows: number[][];
}

export function parseRecordsCsv(text: string): RecordsTable {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length < 2) {
    throw new Error("records csv needs a header and at least one row");
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows = lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== columns.length) {
      throw new Error(`row ${i + 1} has ${parts.length} fields, expected ${columns.length}`);
    }
    return parts.map((p) => Number(p));
  });
  return { columns, rows };
}

export function column(table: RecordsTable, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new Error(`column "${name}" not in header [${table.columns.join(", ")}]`);
  }
  return table.rows.map((r) => r[idx]);
}

/** error_grad + error_pressure, NaN when either part is missing. */
export function totalError(table: RecordsTable): number[] {
  const grad = column(table, "error_grad");
  const pres = column(table, "error_pressure");
  return grad.map((g, i) => g + pres[i]);
}
