import { describe, expect, it } from 'vitest';

import { parseTable } from '../src/csv';
import { deriveChecks, trendNonIncreasing } from '../src/checks';

function table(schema: string, meta: string[], header: string, rows: string[]) {
  return parseTable([
    `# schema: ${schema} v1`,
    '# tool: branchwalk 0.1.0',
    '# config_hash: ' + '0'.repeat(64),
    ...meta,
    header,
    ...rows,
    '',
  ].join('\n'))!;
}

describe('trendNonIncreasing', () => {
  it('accepts flat and decreasing counts', () => {
    expect(trendNonIncreasing([10, 10, 10], 100)).toBe(true);
    expect(trendNonIncreasing([30, 20, 5], 100)).toBe(true);
  });

  it('tolerates an uptick within binomial noise', () => {
    // 10 -> 12 of 100: well inside z * pooled se
    expect(trendNonIncreasing([10, 12], 100)).toBe(true);
  });

  it('rejects a clear increase', () => {
    expect(trendNonIncreasing([10, 40], 100)).toBe(false);
  });

  it('passes trivially with zero replicas', () => {
    expect(trendNonIncreasing([0, 0], 0)).toBe(true);
  });
});

describe('deriveChecks', () => {
  it('calibrate passes small residuals and positive sigma2', () => {
    const t = table('calibrate',
      ['# sigma2: 1.0', '# mean_offspring: 2', '# residual_mass: 0', '# residual_mean: 1e-16'],
      'family,displacement,probability', ['f1,-0.5,0.5', 'f1,2.0,0.5']);
    const rows = deriveChecks(t);
    expect(rows).toHaveLength(1);
    expect(rows[0].passed).toBe(true);
  });

  it('calibrate fails a fat residual', () => {
    const t = table('calibrate',
      ['# sigma2: 1.0', '# residual_mass: 1e-3', '# residual_mean: 0'],
      'family,displacement,probability', ['f1,-0.5,0.5']);
    expect(deriveChecks(t)[0].passed).toBe(false);
  });

  it('spine_check aggregates the passed column', () => {
    const good = table('spine_check', [],
      'check,n_or_k,lhs,rhs,stderr_lhs,stderr_rhs,passed',
      ['many_to_one:g0,1,2.0,2.0,0.01,0.01,1']);
    expect(deriveChecks(good)[0].passed).toBe(true);
    const bad = table('spine_check', [],
      'check,n_or_k,lhs,rhs,stderr_lhs,stderr_rhs,passed',
      ['many_to_one:g0,1,2.0,2.0,0.01,0.01,1', 'many_to_one:g1,1,5.0,1.0,0.01,0.0,0']);
    const row = deriveChecks(bad)[0];
    expect(row.passed).toBe(false);
    expect(row.detail).toContain('1/2 rows');
  });

  it('corollary22 compares first and last frequency', () => {
    const up = table('corollary22', ['# replicas: 100'],
      'n,count,included,frequency,ci_low,ci_high',
      ['100,30,50,0.6,0.5,0.7', '1000,40,50,0.8,0.7,0.9']);
    expect(deriveChecks(up)[0].passed).toBe(true);
    const down = table('corollary22', ['# replicas: 100'],
      'n,count,included,frequency,ci_low,ci_high',
      ['100,40,50,0.8,0.7,0.9', '1000,30,50,0.6,0.5,0.7']);
    expect(deriveChecks(down)[0].passed).toBe(false);
  });

  it('prop23 applies the trend rule per eps group', () => {
    const t = table('prop23', [],
      'eps,threshold,n,count,probability,replicas_used',
      ['0.3,4.5,100,5,0.1,50', '0.3,4.5,1000,2,0.04,50',
       '1,2.1,100,0,0,50', '1,2.1,1000,30,0.6,50']);
    // second eps group jumps 0 -> 30 of 50: must fail
    expect(deriveChecks(t)[0].passed).toBe(false);
  });

  it('barrier reports both trend and convergence rows', () => {
    const t = table('barrier', ['# partial: false', '# sum_budget: 1024'],
      'n,gamma,hit_count,replicas_used,hit_fraction,sum_mean,sum_stderr,sum_replicas,frontier_mass,converged',
      ['100,1.5,6,50,0.12,10,1,4,0.001,1', '1000,1.5,3,50,0.06,11,1,4,0.002,0']);
    const rows = deriveChecks(t);
    expect(rows.map((r) => r.passed)).toEqual([true, false]);
    expect(rows[1].detail).toContain('sum_budget=1024');
  });

  it('theorem21 certifies finite non-negative ratios', () => {
    const good = table('theorem21', ['# sigma2: 1', '# dinf: 5', '# replicas: 10'],
      'n,vertex,U,measured,predicted,ratio',
      ['100,3,-2.0,0.5,0.4,1.25', '1000,3,-2.0,0.45,0.4,1.125']);
    expect(deriveChecks(good)[0].passed).toBe(true);
    const bad = table('theorem21', [],
      'n,vertex,U,measured,predicted,ratio',
      ['100,3,-2.0,0.5,0,Infinity']);
    expect(deriveChecks(bad)[0].passed).toBe(false);
  });
});
