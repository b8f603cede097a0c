// Horizontal stage timeline. One cell per scheduled stage, difficulty bar
// scaled against the threshold, live stage highlighted. Clicking a future
// stage asks the run to stop after it; everything at or behind the cursor
// is inert. Server rejections (409 and friends) surface inline.

import { ApiError } from './api.js';
import type { RunModel } from './model.js';
import type { StagePayload } from './types.js';

function difficultyOf(model: RunModel, stage: StagePayload): number | null {
  const schedule = model.schedule;
  if (!schedule || stage.kind !== 'subtask') return null;
  const at = schedule.ratios.indexOf(stage.ratio);
  if (at <= 0 || at - 1 >= schedule.difficulties.length) return null;
  return schedule.difficulties[at - 1];
}

export class Timeline {
  private notice = '';

  constructor(
    private root: HTMLElement,
    private model: RunModel,
  ) {
    model.subscribe(() => this.render());
    root.addEventListener('click', (event) => {
      const cell = (event.target as HTMLElement).closest<HTMLElement>(
        '[data-stage]',
      );
      if (cell && !cell.hasAttribute('data-disabled')) {
        void this.requestStop(parseInt(cell.dataset.stage!, 10));
      }
    });
    this.render();
  }

  async requestStop(stageIndex: number): Promise<void> {
    // render only what the server scheduled; stale clicks are dropped
    if (!this.model.knownStage(stageIndex)) return;
    try {
      await this.model.control('stop_at', stageIndex);
      this.notice = `will stop after stage ${stageIndex}`;
    } catch (err) {
      this.notice =
        err instanceof ApiError ? `server: ${err.message}` : String(err);
    }
    this.render();
  }

  render(): void {
    const { schedule, status } = this.model;
    if (!schedule || !status) {
      this.root.innerHTML = '<div class="empty">waiting for schedule…</div>';
      return;
    }
    const current = status.stage_index;
    const cells = schedule.stages
      .map((stage) => {
        const difficulty = difficultyOf(this.model, stage);
        const over = difficulty !== null && difficulty > schedule.threshold;
        const height =
          difficulty === null
            ? 0
            : Math.min(100, (difficulty / schedule.threshold) * 75);
        const classes = ['stage', stage.kind];
        if (stage.index === current) classes.push('live');
        if (stage.index < current) classes.push('done');
        if (over) classes.push('over-threshold');
        const disabled = stage.index <= current || this.model.isTerminal();
        return `
          <div class="${classes.join(' ')}" data-stage="${stage.index}"
               ${disabled ? 'data-disabled' : ''} title="${stage.kind} r=${stage.ratio}">
            <div class="bar-well">
              <div class="bar" style="height:${height.toFixed(1)}%"></div>
            </div>
            <div class="stage-label">${stage.index}</div>
            <div class="stage-ratio">${stage.ratio.toFixed(3)}</div>
          </div>`;
      })
      .join('');
    this.root.innerHTML = `
      <div class="timeline-strip">${cells}</div>
      <div class="timeline-meta">
        threshold ${schedule.threshold.toPrecision(4)}
        ${schedule.flags.threshold_met ? '' : '<span class="warn">(not met at the width floor)</span>'}
      </div>
      <div class="timeline-notice">${this.notice}</div>`;
  }
}
