// Snapshot gallery: per-view renders of one chosen aggressivity level plus
// a two-level side-by-side compare. The slider walks the snapshot list the
// server reports; nothing is shown for stages that have not landed.

import type { RunModel } from './model.js';
import type { SnapshotPayload } from './types.js';

const MAX_GRID_VIEWS = 6;

export class Gallery {
  selected = -1; // -1 = follow newest
  compareA = 0;
  compareB = 0;
  compareView = 0;
  private viewCount = 1;
  private renderKey = '';

  constructor(
    private root: HTMLElement,
    private model: RunModel,
  ) {
    model.subscribe(() => this.render());
    void model.api.viewCount().then((count) => {
      this.viewCount = count;
      this.renderKey = '';
      this.render();
    });
    root.addEventListener('input', (event) => {
      const target = event.target as HTMLInputElement;
      if (target.dataset.role === 'level-slider') {
        this.selected = parseInt(target.value, 10);
        this.render();
      }
    });
    root.addEventListener('change', (event) => {
      const target = event.target as HTMLSelectElement;
      if (target.dataset.role === 'compare-a') this.compareA = +target.value;
      else if (target.dataset.role === 'compare-b') this.compareB = +target.value;
      else if (target.dataset.role === 'compare-view') this.compareView = +target.value;
      else return;
      this.render();
    });
    this.render();
  }

  /** Snapshot the slider currently points at, newest when following. */
  current(): { snapshot: SnapshotPayload; index: number } | null {
    const visible = this.model.visibleSnapshots();
    if (visible.length === 0) return null;
    const index =
      this.selected < 0
        ? visible.length - 1
        : Math.min(this.selected, visible.length - 1);
    return { snapshot: visible[index], index };
  }

  private img(snapshot: SnapshotPayload, view: number, cls: string): string {
    const src = this.model.api.renderUrl(
      snapshot.stage_index,
      view,
      this.model.snapshotRevision,
    );
    return `<img class="${cls}" src="${src}" alt="stage ${snapshot.stage_index} view ${view}">`;
  }

  render(): void {
    const visible = this.model.visibleSnapshots();
    const key = [
      visible.length,
      this.model.snapshotRevision,
      this.selected,
      this.compareA,
      this.compareB,
      this.compareView,
      this.viewCount,
    ].join('|');
    if (key === this.renderKey) return;
    this.renderKey = key;

    if (visible.length === 0) {
      this.root.innerHTML = '<div class="empty">no snapshots yet</div>';
      return;
    }
    const picked = this.current()!;
    this.compareA = Math.min(this.compareA, visible.length - 1);
    this.compareB = Math.min(this.compareB, visible.length - 1);
    const views = Math.min(this.viewCount, MAX_GRID_VIEWS);

    const grid = Array.from({ length: views }, (_, v) =>
      this.img(picked.snapshot, v, 'cell'),
    ).join('');

    const levelOptions = (chosen: number) =>
      visible
        .map(
          (snap, i) =>
            `<option value="${i}" ${i === chosen ? 'selected' : ''}>` +
            `${i}: r=${snap.ratio.toFixed(3)}</option>`,
        )
        .join('');
    const viewOptions = Array.from(
      { length: this.viewCount },
      (_, v) =>
        `<option value="${v}" ${v === this.compareView ? 'selected' : ''}>view ${v}</option>`,
    ).join('');

    this.root.innerHTML = `
      <div class="gallery-controls">
        <label>aggressivity
          <input type="range" data-role="level-slider" min="0"
                 max="${visible.length - 1}" value="${picked.index}">
        </label>
        <span class="level-readout">
          snapshot ${picked.index} / ${visible.length - 1},
          stage ${picked.snapshot.stage_index}, r=${picked.snapshot.ratio.toFixed(3)},
          ${picked.snapshot.metrics.n_gaussians} gaussians
        </span>
      </div>
      <div class="gallery-grid">${grid}</div>
      <div class="compare">
        <div class="compare-controls">
          compare
          <select data-role="compare-a">${levelOptions(this.compareA)}</select>
          vs
          <select data-role="compare-b">${levelOptions(this.compareB)}</select>
          at
          <select data-role="compare-view">${viewOptions}</select>
        </div>
        <div class="compare-panels">
          ${this.img(visible[this.compareA], this.compareView, 'pane')}
          ${this.img(visible[this.compareB], this.compareView, 'pane')}
        </div>
      </div>`;
  }
}
