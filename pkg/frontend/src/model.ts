// Client-side mirror of one live run. Holds the last served status,
// schedule, and snapshot list, plus the chart series sampled from status
// records. Refreshes ride the event stream when it is up and fall back to
// 1 s polling when it is not. All mutations go through the ApiClient and
// the server's responses overwrite whatever was shown optimistically.

import { ApiClient } from './api.js';
import type {
  ChartPoint,
  ControlAction,
  RunEvent,
  SchedulePayload,
  SnapshotPayload,
  StagePayload,
  StatusPayload,
} from './types.js';

export type Listener = () => void;

const TERMINAL_MODES = new Set(['finished', 'aborted']);

export class RunModel {
  status: StatusPayload | null = null;
  schedule: SchedulePayload | null = null;
  snapshots: SnapshotPayload[] = [];
  chartPoints: ChartPoint[] = [];
  /** 'stream' while the event stream is attached, 'polling' on fallback. */
  connection: 'idle' | 'stream' | 'polling' = 'idle';
  /** Bumped whenever a snapshot lands so <img> caches get bypassed. */
  snapshotRevision = 0;
  lastError: string | null = null;

  private listeners = new Set<Listener>();
  private stopped = false;
  private abort: AbortController | null = null;

  constructor(
    readonly api: ApiClient,
    private pollMs = 1000,
  ) {}

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  // ----- invariant gates: views render only what the server scheduled ----

  knownStage(index: number): StagePayload | undefined {
    return this.schedule?.stages.find((s) => s.index === index);
  }

  /** Snapshots whose stage and ratio still exist in the served schedule. */
  visibleSnapshots(): SnapshotPayload[] {
    if (!this.schedule) return [];
    return this.snapshots.filter((snap) => {
      const stage = this.knownStage(snap.stage_index);
      return stage !== undefined && stage.ratio === snap.ratio;
    });
  }

  isTerminal(): boolean {
    return this.status !== null && TERMINAL_MODES.has(this.status.mode);
  }

  // ----- refresh ---------------------------------------------------------

  applyStatus(status: StatusPayload): void {
    this.status = status;
    this.recordPoint(status);
    this.emit();
  }

  /** One chart point per distinct status record served. */
  private recordPoint(status: StatusPayload): void {
    const last = this.chartPoints[this.chartPoints.length - 1];
    if (
      last &&
      last.iteration === status.iteration &&
      last.stage_index === status.stage_index
    ) {
      return;
    }
    this.chartPoints.push({
      iteration: status.iteration,
      stage_index: status.stage_index,
      loss_running_mean: status.loss_running_mean,
      n_gaussians: status.n_gaussians,
    });
  }

  async refreshStatus(): Promise<void> {
    this.applyStatus(await this.api.status());
  }

  async refreshSchedule(): Promise<void> {
    this.schedule = await this.api.schedule();
    this.emit();
  }

  async refreshSnapshots(): Promise<void> {
    const fresh = await this.api.snapshots();
    if (fresh.length !== this.snapshots.length) this.snapshotRevision++;
    this.snapshots = fresh;
    this.emit();
  }

  async refreshAll(): Promise<void> {
    await Promise.all([
      this.refreshStatus(),
      this.refreshSchedule(),
      this.refreshSnapshots(),
    ]);
  }

  // ----- control (optimistic; server response is the reconciliation) -----

  async control(action: ControlAction, stage?: number): Promise<void> {
    const status = await this.api.control(action, stage);
    this.lastError = null;
    this.applyStatus(status);
  }

  async setThreshold(threshold: number): Promise<void> {
    this.schedule = await this.api.setThreshold(threshold);
    this.lastError = null;
    this.emit();
    await this.refreshStatus();
  }

  // ----- event stream with polling fallback ------------------------------

  applyEvent(event: RunEvent): Promise<void> {
    switch (event.event) {
      case 'stage_started':
        return Promise.all([this.refreshStatus(), this.refreshSchedule()]).then(
          () => undefined,
        );
      case 'snapshot_written':
        this.snapshotRevision++;
        return Promise.all([this.refreshSnapshots(), this.refreshStatus()]).then(
          () => undefined,
        );
      case 'schedule_adjusted':
        return this.refreshSchedule();
      case 'finished':
      case 'aborted':
        return this.refreshAll();
      default:
        // paused, resumed, converged, maintenance: status is enough
        return this.refreshStatus();
    }
  }

  /** Run the refresh loop until stop() or the run reaches a terminal mode. */
  async start(): Promise<void> {
    this.stopped = false;
    await this.refreshAll();
    while (!this.stopped && !this.isTerminal()) {
      this.abort = new AbortController();
      try {
        this.connection = 'stream';
        this.emit();
        await this.api.streamEvents(
          (event) => void this.applyEvent(event).catch(() => undefined),
          this.abort.signal,
        );
        // orderly close: server ends the stream when the run finishes
        await this.refreshAll();
        if (this.isTerminal()) break;
      } catch {
        if (this.stopped) break;
        this.connection = 'polling';
        this.emit();
        await this.pollFor(5);
      }
    }
    this.connection = 'idle';
    this.emit();
  }

  private async pollFor(cycles: number): Promise<void> {
    for (let i = 0; i < cycles && !this.stopped; i++) {
      await new Promise((resolve) => setTimeout(resolve, this.pollMs));
      try {
        await this.refreshAll();
      } catch {
        // server unreachable; keep trying until the stream reattaches
      }
      if (this.isTerminal()) return;
    }
  }

  stop(): void {
    this.stopped = true;
    this.abort?.abort();
  }
}
