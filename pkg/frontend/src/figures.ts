// One figure per recognized table. Each builder maps already-computed CSV
// columns onto chart geometry; no statistic is recomputed here.
import { BranchwalkTable, CsvFormatError, column, numericColumn } from './csv';
import { FigureSpec, PanelSpec, Series, color, fmtTick } from './svg';

function uniqueSorted(xs: number[]): number[] {
  return [...new Set(xs)].sort((a, b) => a - b);
}

function footer(t: BranchwalkTable): string {
  return `config ${t.configHash}`;
}

function figureBarrier(t: BranchwalkTable): FigureSpec {
  const n = numericColumn(t, 'n');
  const hf = numericColumn(t, 'hit_fraction');
  const gamma = numericColumn(t, 'gamma')[0];
  const panel: PanelSpec = {
    xLabel: 'n (walk horizon)',
    yLabel: 'barrier hit fraction',
    xLog: true,
    xTicks: uniqueSorted(n),
    yDomain: [0, Math.max(0.01, Math.max(...hf) * 1.3)],
    series: [
      { kind: 'line', color: color(0), x: n, y: hf, label: `gamma=${fmtTick(gamma)}` },
    ],
  };
  return { title: 'barrier: hit fraction vs horizon', footer: footer(t), panels: [panel] };
}

function figureCalibrate(t: BranchwalkTable): FigureSpec {
  const v = numericColumn(t, 'displacement');
  const p = numericColumn(t, 'probability');
  const family = String(column(t, 'family')[0]);
  const panel: PanelSpec = {
    xLabel: 'displacement',
    yLabel: 'probability',
    yDomain: [0, Math.max(...p) * 1.25],
    series: [
      { kind: 'bars', color: color(0), x: v, y: p, label: `family ${family}` },
    ],
  };
  return { title: 'calibrate: displacement law', footer: footer(t), panels: [panel] };
}

function figureCorollary22(t: BranchwalkTable): FigureSpec {
  const n = numericColumn(t, 'n');
  const freq = numericColumn(t, 'frequency');
  const lo = numericColumn(t, 'ci_low');
  const hi = numericColumn(t, 'ci_high');
  const panel: PanelSpec = {
    xLabel: 'n (walk horizon)',
    yLabel: 'favorite-subset frequency',
    xLog: true,
    xTicks: uniqueSorted(n),
    yDomain: [0, 1],
    series: [
      { kind: 'band', color: color(0), x: n, y: lo, yHi: hi, label: '95% CI' },
      { kind: 'line', color: color(0), x: n, y: freq, label: 'frequency' },
    ],
  };
  return { title: 'corollary22: favorite-subset frequency vs n', footer: footer(t), panels: [panel] };
}

function figureProp23(t: BranchwalkTable): FigureSpec {
  const eps = numericColumn(t, 'eps');
  const n = numericColumn(t, 'n');
  const prob = numericColumn(t, 'probability');
  const groups = new Map<number, { x: number[]; y: number[] }>();
  for (let i = 0; i < eps.length; i++) {
    const g = groups.get(eps[i]) ?? { x: [], y: [] };
    g.x.push(n[i]);
    g.y.push(prob[i]);
    groups.set(eps[i], g);
  }
  const series: Series[] = [...groups.entries()].map(([e, g], i) => ({
    kind: 'line' as const,
    color: color(i),
    x: g.x,
    y: g.y,
    label: `eps=${fmtTick(e)}`,
  }));
  const panel: PanelSpec = {
    xLabel: 'n (walk horizon)',
    yLabel: 'exceedance probability',
    xLog: true,
    xTicks: uniqueSorted(n),
    yDomain: [0, Math.max(0.01, Math.max(...prob) * 1.4)],
    series,
  };
  return { title: 'prop23: heavy-visit exceedance vs n', footer: footer(t), panels: [panel] };
}

function figureSpineCheck(t: BranchwalkTable): FigureSpec {
  const label = column(t, 'check').map(String);
  const nOrK = numericColumn(t, 'n_or_k');
  const lhs = numericColumn(t, 'lhs');
  const rhs = numericColumn(t, 'rhs');
  const seLhs = numericColumn(t, 'stderr_lhs');

  const twoSided = { x: [] as number[], y: [] as number[] };
  const slopeRows = { x: [] as number[], y: [] as number[] };
  const stopped = { k: [] as number[], est: [] as number[], se: [] as number[], ceil: [] as number[] };
  for (let i = 0; i < label.length; i++) {
    if (label[i].startsWith('many_to_one')) {
      twoSided.x.push(rhs[i]);
      twoSided.y.push(lhs[i]);
    } else if (label[i] === 'persistence_slope') {
      slopeRows.x.push(rhs[i]);
      slopeRows.y.push(lhs[i]);
    } else if (label[i] === 'stopped_sum_ceiling') {
      stopped.k.push(nOrK[i]);
      stopped.est.push(lhs[i]);
      stopped.se.push(seLhs[i]);
      stopped.ceil.push(rhs[i]);
    }
  }

  const panels: PanelSpec[] = [];
  if (twoSided.x.length + slopeRows.x.length > 0) {
    const all = twoSided.x.concat(twoSided.y, slopeRows.x, slopeRows.y);
    const lo = Math.min(...all);
    const hi = Math.max(...all);
    const series: Series[] = [
      { kind: 'line', color: '#888', x: [lo, hi], y: [lo, hi], dashed: true, label: 'y = x' },
    ];
    if (twoSided.x.length > 0) {
      series.push({ kind: 'points', color: color(0), x: twoSided.x, y: twoSided.y, label: 'many_to_one' });
    }
    if (slopeRows.x.length > 0) {
      series.push({ kind: 'points', color: color(2), shape: 'cross', x: slopeRows.x, y: slopeRows.y, label: 'persistence slope' });
    }
    panels.push({
      title: 'two-sided identities',
      xLabel: 'tilted-side prediction',
      yLabel: 'tree-side estimate',
      series,
    });
  }
  if (stopped.k.length > 0) {
    const ceil = stopped.ceil[0];
    panels.push({
      title: 'stopped sums vs ceiling',
      xLabel: 'lambda',
      yLabel: 'estimate',
      xLog: true,
      xTicks: uniqueSorted(stopped.k),
      yDomain: [0, ceil * 1.12],
      series: [
        {
          kind: 'line', color: color(1), dashed: true, label: 'ceiling',
          x: [Math.min(...stopped.k), Math.max(...stopped.k)], y: [ceil, ceil],
        },
        {
          kind: 'errorbars', color: color(0), label: 'estimate +/- 4se',
          x: stopped.k, y: stopped.est, yHalf: stopped.se.map((s) => 4 * s),
        },
      ],
    });
  }
  if (panels.length === 0) {
    throw new CsvFormatError("schema 'spine_check': no recognizable check rows");
  }
  return { title: 'spine_check: estimates vs predictions', footer: footer(t), panels };
}

function figureTheorem21(t: BranchwalkTable): FigureSpec {
  const n = numericColumn(t, 'n');
  const vertex = numericColumn(t, 'vertex');
  const ratio = numericColumn(t, 'ratio');
  const groups = new Map<number, { x: number[]; y: number[] }>();
  for (let i = 0; i < vertex.length; i++) {
    const g = groups.get(vertex[i]) ?? { x: [], y: [] };
    g.x.push(n[i]);
    g.y.push(ratio[i]);
    groups.set(vertex[i], g);
  }
  const series: Series[] = [...groups.entries()].map(([v, g], i) => ({
    kind: 'line' as const,
    color: color(i),
    x: g.x,
    y: g.y,
    label: `vertex ${v}`,
  }));
  const panel: PanelSpec = {
    xLabel: 'n (walk horizon)',
    yLabel: 'measured / predicted local time',
    xLog: true,
    xTicks: uniqueSorted(n),
    refLineY: 1,
    series,
  };
  return { title: 'theorem21: scaled local time ratio vs n', footer: footer(t), panels: [panel] };
}

function figureTheorem21Excursions(t: BranchwalkTable): FigureSpec {
  const u = numericColumn(t, 'U');
  const mean = numericColumn(t, 'measured_mean');
  const se = numericColumn(t, 'stderr');
  const pred = numericColumn(t, 'predicted');
  const panel: PanelSpec = {
    xLabel: 'potential U(x)',
    yLabel: 'mean visits per excursion',
    series: [
      { kind: 'errorbars', color: color(0), x: u, y: mean, yHalf: se.map((s) => 4 * s), label: 'measured +/- 4se' },
      { kind: 'points', color: color(1), shape: 'cross', x: u, y: pred, label: 'predicted' },
    ],
  };
  return { title: 'theorem21: excursion-normalized visit means', footer: footer(t), panels: [panel] };
}

function figureTheorem21Favorites(t: BranchwalkTable): FigureSpec {
  const n = numericColumn(t, 'n');
  const freq = numericColumn(t, 'frequency');
  const panel: PanelSpec = {
    xLabel: 'n (walk horizon)',
    yLabel: 'favorite-site frequency',
    xLog: true,
    xTicks: uniqueSorted(n),
    yDomain: [0, 1],
    series: [
      { kind: 'line', color: color(0), x: n, y: freq, label: 'frequency' },
    ],
  };
  return { title: 'theorem21: favorite-site frequency vs n', footer: footer(t), panels: [panel] };
}

const FIGURE_BUILDERS: ReadonlyMap<string, (t: BranchwalkTable) => FigureSpec> = new Map([
  ['barrier', figureBarrier],
  ['calibrate', figureCalibrate],
  ['corollary22', figureCorollary22],
  ['prop23', figureProp23],
  ['spine_check', figureSpineCheck],
  ['theorem21', figureTheorem21],
  ['theorem21_excursions', figureTheorem21Excursions],
  ['theorem21_favorites', figureTheorem21Favorites],
]);

export function buildFigure(table: BranchwalkTable): FigureSpec {
  const builder = FIGURE_BUILDERS.get(table.schema);
  if (!builder) {
    throw new CsvFormatError(`no figure builder for schema '${table.schema}'`);
  }
  if (table.rows.length === 0) {
    throw new CsvFormatError(`schema '${table.schema}': no data rows`);
  }
  return builder(table);
}
