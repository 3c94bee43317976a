/**
 * Strict numeric CSV loading for the villani-net artifacts.
 *
 * Every artifact this package renders (sweep.csv, trajectory CSVs,
 * sde_series.csv) is a plain comma-separated table with a header row and
 * purely numeric cells. Loading is strict on purpose: a missing column or a
 * non-numeric cell means the file is not the artifact the caller thinks it
 * is, so we fail with a message naming the offender instead of rendering
 * garbage.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export class CsvError extends Error {}

export type NumericRow = Record<string, number>;

/**
 * Parse CSV text into numeric rows, requiring the named columns.
 *
 * Only the required columns are converted and returned; extra columns are
 * ignored so callers can render a subset of a wider artifact. Throws
 * CsvError on empty input, missing columns, zero data rows, or cells that
 * do not parse as finite numbers.
 */
export function parseTable(text: string, required: string[]): NumericRow[] {
  if (text.trim().length === 0) {
    throw new CsvError("empty CSV");
  }
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new CsvError(`malformed CSV: ${first.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  const missing = required.filter((c) => !fields.includes(c));
  if (missing.length > 0) {
    throw new CsvError(
      `missing columns [${missing.join(", ")}]; file has [${fields.join(", ")}]`
    );
  }
  if (parsed.data.length === 0) {
    throw new CsvError("CSV has a header but no data rows");
  }
  return parsed.data.map((raw, i) => {
    const row: NumericRow = {};
    for (const col of required) {
      const cell = raw[col];
      const value = cell === undefined || cell.trim() === "" ? NaN : Number(cell);
      if (!Number.isFinite(value)) {
        throw new CsvError(
          `non-numeric value ${JSON.stringify(cell ?? "")} in column "${col}", data row ${i + 1}`
        );
      }
      row[col] = value;
    }
    return row;
  });
}

/** Read a CSV file and parse it with parseTable. The file is only read. */
export function readTable(path: string, required: string[]): NumericRow[] {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new CsvError(`cannot read ${path}: ${(err as Error).message}`);
  }
  try {
    return parseTable(text, required);
  } catch (err) {
    if (err instanceof CsvError) {
      throw new CsvError(`${path}: ${err.message}`);
    }
    throw err;
  }
}

/** Pull one column out of numeric rows in order. */
export function column(rows: NumericRow[], name: string): number[] {
  return rows.map((r) => r[name]);
}
