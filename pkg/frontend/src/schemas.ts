// Registry of the artifact schemas this renderer understands. A table whose
// schema name is listed here but whose version is not → hard refusal; a
// table with an unlisted schema name is skipped and reported as such.
import { BranchwalkTable, CsvFormatError, SchemaVersionError } from './csv';

interface SchemaSpec {
  versions: number[];
  requiredColumns: string[];
}

export const RECOGNIZED: ReadonlyMap<string, SchemaSpec> = new Map<string, SchemaSpec>([
  ['barrier', {
    versions: [1],
    requiredColumns: ['n', 'gamma', 'hit_count', 'replicas_used', 'hit_fraction',
      'sum_mean', 'sum_stderr', 'sum_replicas', 'frontier_mass', 'converged'],
  }],
  ['calibrate', {
    versions: [1],
    requiredColumns: ['family', 'displacement', 'probability'],
  }],
  ['corollary22', {
    versions: [1],
    requiredColumns: ['n', 'count', 'included', 'frequency', 'ci_low', 'ci_high'],
  }],
  ['prop23', {
    versions: [1],
    requiredColumns: ['eps', 'threshold', 'n', 'count', 'probability', 'replicas_used'],
  }],
  ['spine_check', {
    versions: [1],
    requiredColumns: ['check', 'n_or_k', 'lhs', 'rhs', 'stderr_lhs', 'stderr_rhs', 'passed'],
  }],
  ['theorem21', {
    versions: [1],
    requiredColumns: ['n', 'vertex', 'U', 'measured', 'predicted', 'ratio'],
  }],
  ['theorem21_excursions', {
    versions: [1],
    requiredColumns: ['vertex', 'U', 'measured_mean', 'stderr', 'predicted', 'z', 'passed'],
  }],
  ['theorem21_favorites', {
    versions: [1],
    requiredColumns: ['n', 'frequency'],
  }],
]);

/** One line per supported schema+version, for refusal messages. */
export function supportedVersionList(): string {
  const parts: string[] = [];
  for (const name of [...RECOGNIZED.keys()].sort()) {
    const spec = RECOGNIZED.get(name)!;
    for (const v of spec.versions) {
      parts.push(`${name} v${v}`);
    }
  }
  return parts.join(', ');
}

/**
 * Accept or reject one parsed table. Returns true when the table should be
 * rendered, false when its schema name is not recognized (skip).
 */
export function validateTable(table: BranchwalkTable): boolean {
  const spec = RECOGNIZED.get(table.schema);
  if (spec === undefined) {
    return false;
  }
  if (!spec.versions.includes(table.version)) {
    throw new SchemaVersionError(
      `unsupported schema version '${table.schema} v${table.version}'; ` +
      `supported: ${supportedVersionList()}`
    );
  }
  for (const col of spec.requiredColumns) {
    if (!table.columns.includes(col)) {
      throw new CsvFormatError(
        `schema '${table.schema}': missing column '${col}'`
      );
    }
  }
  if (!/^[0-9a-f]{64}$/.test(table.configHash)) {
    throw new CsvFormatError(
      `schema '${table.schema}': missing or malformed '# config_hash:' line`
    );
  }
  return true;
}
