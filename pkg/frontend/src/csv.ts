// Reader for branchwalk CSV artifacts: '#'-prefixed metadata lines (schema
// name and version, tool version, config hash), one header row, data rows.
import { parse } from 'papaparse';

/** One parsed artifact table. Cells are numbers where they look numeric. */
export interface BranchwalkTable {
  schema: string;
  version: number;
  configHash: string;
  tool: string;
  /** All '# key: value' pairs, including schema/tool/config_hash. */
  meta: Map<string, string>;
  columns: string[];
  rows: (number | string)[][];
}

export class CsvFormatError extends Error {}

/** Raised when a recognized schema arrives at an unsupported version. */
export class SchemaVersionError extends Error {}

const SCHEMA_LINE = /^(.+) v(\d+)$/;

/**
 * Parse the raw text of one branchwalk CSV. Returns null when the text does
 * not carry a '# schema:' line at all (not a branchwalk artifact).
 */
export function parseTable(text: string): BranchwalkTable | null {
  const meta = new Map<string, string>();
  const bodyLines: string[] = [];
  for (const line of text.split('\n')) {
    if (line.startsWith('#')) {
      const stripped = line.slice(1).trim();
      const sep = stripped.indexOf(':');
      if (sep >= 0) {
        meta.set(stripped.slice(0, sep).trim(), stripped.slice(sep + 1).trim());
      }
    } else if (line.trim() !== '') {
      bodyLines.push(line);
    }
  }
  const schemaLine = meta.get('schema');
  if (schemaLine === undefined) {
    return null;
  }
  const m = SCHEMA_LINE.exec(schemaLine);
  if (!m) {
    throw new CsvFormatError(`malformed schema line '${schemaLine}'`);
  }
  if (bodyLines.length === 0) {
    throw new CsvFormatError(`schema '${m[1]}': no header row after metadata`);
  }
  const parsed = parse<(number | string)[]>(bodyLines.join('\n'), {
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new CsvFormatError(`schema '${m[1]}': ${first.message}`);
  }
  const grid = parsed.data;
  const columns = grid[0].map((c) => String(c));
  const rows = grid.slice(1);
  for (const row of rows) {
    if (row.length !== columns.length) {
      throw new CsvFormatError(
        `schema '${m[1]}': row width ${row.length} != header width ${columns.length}`
      );
    }
  }
  return {
    schema: m[1],
    version: parseInt(m[2], 10),
    configHash: meta.get('config_hash') ?? '',
    tool: meta.get('tool') ?? '',
    meta,
    columns,
    rows,
  };
}

/** Pull one column as numbers; throws if the column is missing. */
export function numericColumn(table: BranchwalkTable, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new CsvFormatError(`schema '${table.schema}': missing column '${name}'`);
  }
  return table.rows.map((row) => {
    const v = row[idx];
    return typeof v === 'number' ? v : Number(v);
  });
}

/** Pull one column as raw cells; throws if the column is missing. */
export function column(table: BranchwalkTable, name: string): (number | string)[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new CsvFormatError(`schema '${table.schema}': missing column '${name}'`);
  }
  return table.rows.map((row) => row[idx]);
}
