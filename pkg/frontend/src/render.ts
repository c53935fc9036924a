// render(csvDir, outDir): parse every branchwalk CSV in csvDir, build one SVG
// figure per recognized table plus a plain-text pass/fail summary, and write
// them to outDir. All parsing and figure building happens before the first
// write, so a refused input leaves no partial outputs.
import { readFileSync, readdirSync, mkdirSync, writeFileSync } from 'fs';
import * as path from 'path';

import { BranchwalkTable, parseTable } from './csv';
import { validateTable, supportedVersionList } from './schemas';
import { CheckRow, deriveChecks } from './checks';
import { buildFigure } from './figures';
import { renderFigure } from './svg';

export class RenderInputError extends Error {}

interface SkippedFile {
  name: string;
  reason: string;
}

function uniqueSorted(values: string[]): string[] {
  return [...new Set(values)].sort();
}

function buildSummary(
  tables: BranchwalkTable[],
  figureNames: string[],
  skipped: SkippedFile[],
  checks: CheckRow[]
): string {
  const lines: string[] = ['branchwalk report'];
  lines.push(`tool: ${uniqueSorted(tables.map((t) => t.tool)).join(', ')}`);
  lines.push(`config_hash: ${uniqueSorted(tables.map((t) => t.configHash)).join(', ')}`);
  lines.push(`tables: ${tables.length}`);
  lines.push('figures:');
  for (const name of figureNames) {
    lines.push(`  ${name}`);
  }
  if (skipped.length > 0) {
    lines.push('skipped:');
    for (const s of skipped) {
      lines.push(`  ${s.name} (${s.reason})`);
    }
  }
  lines.push('checks:');
  for (const c of checks) {
    const mark = c.passed ? 'PASS' : 'FAIL';
    const suffix = c.detail ? `  (${c.detail})` : '';
    lines.push(`  ${c.name}: ${mark}${suffix}`);
  }
  if (checks.length === 0) {
    lines.push('  (none)');
  }
  const overall = checks.every((c) => c.passed) ? 'PASS' : 'FAIL';
  lines.push(`overall: ${overall}`);
  return lines.join('\n') + '\n';
}

/**
 * Render all recognized tables under csvDir into outDir. Returns the list of
 * written file paths (figures first, then summary.txt).
 */
export function render(csvDir: string, outDir: string): string[] {
  if (path.resolve(csvDir) === path.resolve(outDir)) {
    throw new RenderInputError('refusing to write into the input directory');
  }
  let entries: string[];
  try {
    entries = readdirSync(csvDir);
  } catch {
    throw new RenderInputError(`cannot read input directory '${csvDir}'`);
  }
  const csvFiles = entries.filter((e) => e.endsWith('.csv')).sort();

  const tables: BranchwalkTable[] = [];
  const skipped: SkippedFile[] = [];
  const seen = new Map<string, string>();
  for (const name of csvFiles) {
    const text = readFileSync(path.join(csvDir, name), 'utf8');
    const table = parseTable(text);
    if (table === null) {
      skipped.push({ name, reason: 'not a branchwalk table' });
      continue;
    }
    if (!validateTable(table)) {
      skipped.push({ name, reason: `unrecognized schema '${table.schema}'` });
      continue;
    }
    const prior = seen.get(table.schema);
    if (prior !== undefined) {
      throw new RenderInputError(
        `duplicate schema '${table.schema}' in '${prior}' and '${name}'`
      );
    }
    seen.set(table.schema, name);
    tables.push(table);
  }
  if (tables.length === 0) {
    throw new RenderInputError(
      `no recognized tables in '${csvDir}'; supported: ${supportedVersionList()}`
    );
  }
  tables.sort((a, b) => (a.schema < b.schema ? -1 : 1));

  const figures = tables.map((t) => ({
    name: `${t.schema}.svg`,
    svg: renderFigure(buildFigure(t)),
  }));
  const checks = tables.flatMap((t) => deriveChecks(t));
  const summary = buildSummary(tables, figures.map((f) => f.name), skipped, checks);

  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  for (const fig of figures) {
    const p = path.join(outDir, fig.name);
    writeFileSync(p, fig.svg, 'utf8');
    written.push(p);
  }
  const summaryPath = path.join(outDir, 'summary.txt');
  writeFileSync(summaryPath, summary, 'utf8');
  written.push(summaryPath);
  return written;
}
