// Minimal deterministic SVG charts: no timestamps, no randomness, fixed
// coordinate precision, so reruns emit byte-identical files.

export interface Series {
  kind: 'line' | 'points' | 'band' | 'errorbars' | 'bars';
  label?: string;
  color: string;
  x: number[];
  y: number[];
  /** errorbars: half-width of the whisker around y. */
  yHalf?: number[];
  /** band: upper edge (y is the lower edge). */
  yHi?: number[];
  shape?: 'circle' | 'cross';
  dashed?: boolean;
}

export interface PanelSpec {
  title?: string;
  xLabel: string;
  yLabel: string;
  xLog?: boolean;
  xDomain?: [number, number];
  yDomain?: [number, number];
  /** Dashed horizontal reference line (e.g. ratio = 1). */
  refLineY?: number;
  /** Explicit x tick positions; defaults to nice linear ticks. */
  xTicks?: number[];
  series: Series[];
}

export interface FigureSpec {
  title: string;
  /** Rendered bottom-right in every figure, e.g. 'config <hash>'. */
  footer: string;
  panels: PanelSpec[];
}

const PALETTE = ['#0072b2', '#d55e00', '#009e73', '#cc79a7', '#e69f00', '#56b4e9'];
const FONT = "font-family=\"'DejaVu Sans',Verdana,sans-serif\"";
const MONO = "font-family=\"'DejaVu Sans Mono',monospace\"";

export function color(i: number): string {
  return PALETTE[i % PALETTE.length];
}

export function esc(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function px(v: number): string {
  return v.toFixed(2);
}

/** Tick label formatting: short, deterministic. */
export function fmtTick(x: number): string {
  if (!Number.isFinite(x)) return String(x);
  if (x !== 0 && (Math.abs(x) >= 1e5 || Math.abs(x) < 1e-3)) {
    return x.toExponential(0).replace('+', '');
  }
  return Number(x.toPrecision(4)).toString();
}

function niceNum(range: number, round: boolean): number {
  const exp = Math.floor(Math.log10(range));
  const frac = range / Math.pow(10, exp);
  let nice: number;
  if (round) {
    nice = frac < 1.5 ? 1 : frac < 3 ? 2 : frac < 7 ? 5 : 10;
  } else {
    nice = frac <= 1 ? 1 : frac <= 2 ? 2 : frac <= 5 ? 5 : 10;
  }
  return nice * Math.pow(10, exp);
}

export function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const step = niceNum(niceNum(hi - lo, false) / (count - 1), true);
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + step * 1e-9; v += step) {
    // snap away float drift so labels stay clean
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

interface Scale {
  (v: number): number;
}

function makeScale(domain: [number, number], range: [number, number], log: boolean): Scale {
  const [d0, d1] = log ? [Math.log10(domain[0]), Math.log10(domain[1])] : domain;
  const span = d1 - d0 || 1;
  return (v: number) => {
    const t = ((log ? Math.log10(v) : v) - d0) / span;
    return range[0] + t * (range[1] - range[0]);
  };
}

function seriesExtent(series: Series[], refLineY?: number): [number[], number[]] {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of series) {
    xs.push(...s.x);
    for (let i = 0; i < s.y.length; i++) {
      ys.push(s.y[i]);
      if (s.yHalf) {
        ys.push(s.y[i] - s.yHalf[i], s.y[i] + s.yHalf[i]);
      }
      if (s.yHi) {
        ys.push(s.yHi[i]);
      }
    }
    if (s.kind === 'bars') {
      ys.push(0);
    }
  }
  if (refLineY !== undefined) {
    ys.push(refLineY);
  }
  return [xs, ys];
}

function pad(domain: [number, number], frac: number): [number, number] {
  const span = domain[1] - domain[0];
  if (span <= 0) {
    const bump = Math.abs(domain[0]) * 0.1 || 1;
    return [domain[0] - bump, domain[1] + bump];
  }
  return [domain[0] - span * frac, domain[1] + span * frac];
}

function renderPanel(p: PanelSpec, x0: number, y0: number, w: number, h: number): string {
  const m = { l: 58, r: 14, t: p.title ? 30 : 16, b: 46 };
  const plotX = x0 + m.l;
  const plotY = y0 + m.t;
  const plotW = w - m.l - m.r;
  const plotH = h - m.t - m.b;

  const [xsRaw, ysRaw] = seriesExtent(p.series, p.refLineY);
  let xDom = p.xDomain ?? [Math.min(...xsRaw), Math.max(...xsRaw)];
  let yDom = p.yDomain ?? pad([Math.min(...ysRaw), Math.max(...ysRaw)], 0.06);
  if (p.xLog) {
    // multiplicative padding keeps endpoints off the frame
    xDom = [xDom[0] / 1.15, xDom[1] * 1.15];
  } else if (!p.xDomain) {
    xDom = pad(xDom, 0.05);
  }
  const sx = makeScale(xDom, [plotX, plotX + plotW], !!p.xLog);
  const sy = makeScale(yDom, [plotY + plotH, plotY], false);

  const out: string[] = [];
  out.push(`<rect x="${px(plotX)}" y="${px(plotY)}" width="${px(plotW)}" height="${px(plotH)}" fill="none" stroke="#c8cdd4" stroke-width="1"/>`);

  const yTicks = niceTicks(yDom[0], yDom[1], 5);
  for (const t of yTicks) {
    const y = sy(t);
    out.push(`<line x1="${px(plotX)}" y1="${px(y)}" x2="${px(plotX + plotW)}" y2="${px(y)}" stroke="#eceff3" stroke-width="1"/>`);
    out.push(`<text x="${px(plotX - 6)}" y="${px(y + 3)}" ${FONT} font-size="10" fill="#555" text-anchor="end">${esc(fmtTick(t))}</text>`);
  }
  const xTicks = p.xTicks ?? niceTicks(xDom[0], xDom[1], 5);
  for (const t of xTicks) {
    const x = sx(t);
    out.push(`<line x1="${px(x)}" y1="${px(plotY + plotH)}" x2="${px(x)}" y2="${px(plotY + plotH + 4)}" stroke="#555" stroke-width="1"/>`);
    out.push(`<text x="${px(x)}" y="${px(plotY + plotH + 16)}" ${FONT} font-size="10" fill="#555" text-anchor="middle">${esc(fmtTick(t))}</text>`);
  }

  if (p.refLineY !== undefined) {
    const y = sy(p.refLineY);
    out.push(`<line x1="${px(plotX)}" y1="${px(y)}" x2="${px(plotX + plotW)}" y2="${px(y)}" stroke="#888" stroke-width="1" stroke-dasharray="4 3"/>`);
  }

  for (const s of p.series) {
    if (s.kind === 'band' && s.yHi) {
      const fwd = s.x.map((v, i) => `${px(sx(v))},${px(sy(s.y[i]))}`);
      const back = [...s.x.keys()].reverse().map((i) => `${px(sx(s.x[i]))},${px(sy(s.yHi![i]))}`);
      out.push(`<polygon points="${fwd.concat(back).join(' ')}" fill="${s.color}" fill-opacity="0.16" stroke="none"/>`);
    }
  }
  for (const s of p.series) {
    if (s.kind === 'bars') {
      const barW = Math.min(18, (plotW / Math.max(1, s.x.length)) * 0.4);
      const yZero = sy(Math.max(yDom[0], 0));
      for (let i = 0; i < s.x.length; i++) {
        const cx = sx(s.x[i]);
        const yTop = sy(s.y[i]);
        out.push(`<rect x="${px(cx - barW / 2)}" y="${px(Math.min(yTop, yZero))}" width="${px(barW)}" height="${px(Math.abs(yZero - yTop))}" fill="${s.color}" fill-opacity="0.85"/>`);
      }
    } else if (s.kind === 'errorbars' && s.yHalf) {
      for (let i = 0; i < s.x.length; i++) {
        const cx = sx(s.x[i]);
        const yLo = sy(s.y[i] - s.yHalf[i]);
        const yHi = sy(s.y[i] + s.yHalf[i]);
        out.push(`<line x1="${px(cx)}" y1="${px(yLo)}" x2="${px(cx)}" y2="${px(yHi)}" stroke="${s.color}" stroke-width="1.2"/>`);
        out.push(`<line x1="${px(cx - 3.5)}" y1="${px(yLo)}" x2="${px(cx + 3.5)}" y2="${px(yLo)}" stroke="${s.color}" stroke-width="1.2"/>`);
        out.push(`<line x1="${px(cx - 3.5)}" y1="${px(yHi)}" x2="${px(cx + 3.5)}" y2="${px(yHi)}" stroke="${s.color}" stroke-width="1.2"/>`);
        out.push(`<circle cx="${px(cx)}" cy="${px(sy(s.y[i]))}" r="2.6" fill="${s.color}"/>`);
      }
    } else if (s.kind === 'line') {
      const pts = s.x.map((v, i) => `${px(sx(v))},${px(sy(s.y[i]))}`).join(' ');
      const dash = s.dashed ? ' stroke-dasharray="5 3"' : '';
      out.push(`<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.8"${dash}/>`);
      for (let i = 0; i < s.x.length; i++) {
        out.push(`<circle cx="${px(sx(s.x[i]))}" cy="${px(sy(s.y[i]))}" r="2.8" fill="${s.color}"/>`);
      }
    } else if (s.kind === 'points') {
      for (let i = 0; i < s.x.length; i++) {
        const cx = sx(s.x[i]);
        const cy = sy(s.y[i]);
        if (s.shape === 'cross') {
          out.push(`<line x1="${px(cx - 3.2)}" y1="${px(cy - 3.2)}" x2="${px(cx + 3.2)}" y2="${px(cy + 3.2)}" stroke="${s.color}" stroke-width="1.6"/>`);
          out.push(`<line x1="${px(cx - 3.2)}" y1="${px(cy + 3.2)}" x2="${px(cx + 3.2)}" y2="${px(cy - 3.2)}" stroke="${s.color}" stroke-width="1.6"/>`);
        } else {
          out.push(`<circle cx="${px(cx)}" cy="${px(cy)}" r="3" fill="${s.color}" fill-opacity="0.85"/>`);
        }
      }
    }
  }

  if (p.title) {
    out.push(`<text x="${px(plotX)}" y="${px(y0 + 18)}" ${FONT} font-size="11" font-weight="bold" fill="#333">${esc(p.title)}</text>`);
  }
  out.push(`<text x="${px(plotX + plotW / 2)}" y="${px(plotY + plotH + 32)}" ${FONT} font-size="11" fill="#333" text-anchor="middle">${esc(p.xLabel)}</text>`);
  out.push(`<text x="${px(x0 + 14)}" y="${px(plotY + plotH / 2)}" ${FONT} font-size="11" fill="#333" text-anchor="middle" transform="rotate(-90 ${px(x0 + 14)} ${px(plotY + plotH / 2)})">${esc(p.yLabel)}</text>`);

  const labeled = p.series.filter((s) => s.label);
  if (labeled.length > 0) {
    let ly = plotY + 8;
    for (const s of labeled) {
      const lx = plotX + plotW - 12;
      if (s.kind === 'band') {
        out.push(`<rect x="${px(lx - 58)}" y="${px(ly - 4)}" width="14" height="8" fill="${s.color}" fill-opacity="0.3"/>`);
      } else if (s.shape === 'cross') {
        out.push(`<line x1="${px(lx - 56)}" y1="${px(ly - 3)}" x2="${px(lx - 48)}" y2="${px(ly + 3)}" stroke="${s.color}" stroke-width="1.6"/>`);
        out.push(`<line x1="${px(lx - 56)}" y1="${px(ly + 3)}" x2="${px(lx - 48)}" y2="${px(ly - 3)}" stroke="${s.color}" stroke-width="1.6"/>`);
      } else {
        const dash = s.dashed ? ' stroke-dasharray="5 3"' : '';
        out.push(`<line x1="${px(lx - 58)}" y1="${px(ly)}" x2="${px(lx - 44)}" y2="${px(ly)}" stroke="${s.color}" stroke-width="2"${dash}/>`);
      }
      out.push(`<text x="${px(lx - 40)}" y="${px(ly + 3)}" ${FONT} font-size="10" fill="#333" text-anchor="start">${esc(s.label!)}</text>`);
      ly += 14;
    }
  }
  return out.join('\n');
}

export function renderFigure(spec: FigureSpec): string {
  const n = spec.panels.length;
  const width = n === 1 ? 720 : 480 * n;
  const height = 420;
  const headH = 30;
  const footH = 18;
  const panelW = width / n;
  const panelH = height - headH - footH;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`);
  parts.push(`<rect x="0" y="0" width="${width}" height="${height}" fill="#ffffff"/>`);
  parts.push(`<text x="12" y="20" ${FONT} font-size="13" font-weight="bold" fill="#111">${esc(spec.title)}</text>`);
  for (let i = 0; i < n; i++) {
    parts.push(renderPanel(spec.panels[i], i * panelW, headH, panelW, panelH));
  }
  parts.push(`<text x="${width - 10}" y="${height - 6}" ${MONO} font-size="9" fill="#777" text-anchor="end">${esc(spec.footer)}</text>`);
  parts.push('</svg>');
  return parts.join('\n') + '\n';
}
