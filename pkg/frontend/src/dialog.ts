// Run controls plus the threshold dialog. Adjusting the remaining schedule
// is a pause -> set threshold -> resume flow: the form stays disabled
// until the run is actually paused (the server enforces it anyway and a
// 409 lands in the message line).

import { ApiError } from './api.js';
import type { RunModel } from './model.js';

export class ControlPanel {
  private message = '';

  constructor(
    private root: HTMLElement,
    private model: RunModel,
  ) {
    model.subscribe(() => this.render());
    root.addEventListener('click', (event) => {
      const button = (event.target as HTMLElement).closest<HTMLButtonElement>(
        'button[data-action]',
      );
      if (!button || button.disabled) return;
      const action = button.dataset.action!;
      if (action === 'apply-threshold') void this.applyThreshold();
      else void this.issue(action as 'pause' | 'resume' | 'skip_stage');
    });
    this.render();
  }

  async issue(action: 'pause' | 'resume' | 'skip_stage'): Promise<void> {
    try {
      await this.model.control(action);
      this.message = '';
    } catch (err) {
      this.message = err instanceof ApiError ? `server: ${err.message}` : String(err);
    }
    this.render();
  }

  async applyThreshold(): Promise<void> {
    const input = this.root.querySelector<HTMLInputElement>('#threshold-input');
    const value = input ? parseFloat(input.value) : NaN;
    if (!Number.isFinite(value) || value <= 0) {
      this.message = 'threshold must be a positive number';
      this.render();
      return;
    }
    try {
      await this.model.setThreshold(value);
      this.message = `schedule re-decomposed below threshold ${value}`;
    } catch (err) {
      this.message = err instanceof ApiError ? `server: ${err.message}` : String(err);
    }
    this.render();
  }

  render(): void {
    const status = this.model.status;
    const mode = status?.mode ?? 'unknown';
    const terminal = this.model.isTerminal();
    const paused = mode === 'paused';
    const threshold = this.model.schedule?.threshold;
    // preserve the user's draft across re-renders
    const draft =
      this.root.querySelector<HTMLInputElement>('#threshold-input')?.value ??
      (threshold !== undefined ? String(threshold) : '');
    this.root.innerHTML = `
      <div class="mode-line">mode: <b class="mode-${mode}">${mode}</b>
        <span class="conn">(${this.model.connection})</span></div>
      <div class="control-buttons">
        <button data-action="pause" ${paused || terminal ? 'disabled' : ''}>pause</button>
        <button data-action="resume" ${!paused ? 'disabled' : ''}>resume</button>
        <button data-action="skip_stage" ${terminal ? 'disabled' : ''}>skip stage</button>
      </div>
      <fieldset class="threshold-dialog" ${paused ? '' : 'disabled'}>
        <legend>difficulty threshold</legend>
        <input id="threshold-input" type="number" step="any" min="0" value="${draft}">
        <button data-action="apply-threshold">re-decompose remaining</button>
        <div class="hint">${paused ? 'applies to stages after the current one' : 'pause the run to adjust'}</div>
      </fieldset>
      <div class="control-message">${this.message}</div>`;
  }
}
