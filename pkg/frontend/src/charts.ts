// Live charts, dependency-free: inline SVG polylines over the status
// samples the model has collected. Left chart is the loss running mean,
// right chart is the Gaussian count; x advances one step per sample.

import type { RunModel } from './model.js';
import type { ChartPoint } from './types.js';

const WIDTH = 420;
const HEIGHT = 140;
const PAD = 8;

function polyline(values: Array<number | null>): string {
  const defined = values
    .map((v, i) => [i, v] as const)
    .filter((pair): pair is readonly [number, number] => pair[1] !== null);
  if (defined.length === 0) return '';
  let lo = Infinity;
  let hi = -Infinity;
  for (const [, v] of defined) {
    lo = Math.min(lo, v);
    hi = Math.max(hi, v);
  }
  const span = hi - lo || 1;
  const denom = Math.max(values.length - 1, 1);
  const points = defined
    .map(([i, v]) => {
      const x = PAD + (i / denom) * (WIDTH - 2 * PAD);
      const y = HEIGHT - PAD - ((v - lo) / span) * (HEIGHT - 2 * PAD);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(' ');
  return `<polyline fill="none" stroke-width="1.5" points="${points}"/>`;
}

function chartSvg(title: string, cls: string, values: Array<number | null>, latest: string): string {
  return `
    <figure class="chart ${cls}">
      <figcaption>${title} <span class="latest">${latest}</span></figcaption>
      <svg viewBox="0 0 ${WIDTH} ${HEIGHT}" preserveAspectRatio="none">
        ${polyline(values)}
      </svg>
    </figure>`;
}

export class Charts {
  constructor(
    private root: HTMLElement,
    private model: RunModel,
  ) {
    model.subscribe(() => this.render());
    this.render();
  }

  pointCount(): number {
    return this.model.chartPoints.length;
  }

  render(): void {
    const points: ChartPoint[] = this.model.chartPoints;
    if (points.length === 0) {
      this.root.innerHTML = '<div class="empty">no samples yet</div>';
      return;
    }
    const last = points[points.length - 1];
    const lossLatest =
      last.loss_running_mean === null ? 'n/a' : last.loss_running_mean.toExponential(3);
    this.root.innerHTML =
      chartSvg(
        'loss running mean',
        'loss-chart',
        points.map((p) => p.loss_running_mean),
        lossLatest,
      ) +
      chartSvg(
        'gaussians',
        'count-chart',
        points.map((p) => p.n_gaussians),
        String(last.n_gaussians),
      ) +
      `<div class="sample-count">${points.length} samples</div>`;
  }
}
