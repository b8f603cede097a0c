// Payload shapes served by the run's control API. The UI treats the server
// as the single source of truth; nothing here is authoritative client state.

export type RunMode = 'running' | 'paused' | 'finished' | 'aborted';

export interface StatusPayload {
  mode: RunMode;
  stage_index: number;
  ratio: number | null;
  iteration: number;
  loss_running_mean: number | null;
  n_gaussians: number;
  total_stages: number;
  completed_stages: number;
}

export type StageKind = 'refine' | 'subtask';

export interface StagePayload {
  index: number;
  ratio: number;
  kind: StageKind;
}

export interface ScheduleFlags {
  prepend_refine: boolean;
  append_refine: boolean;
  threshold_met: boolean;
}

export interface SchedulePayload {
  ratios: number[];
  difficulties: number[];
  threshold: number;
  flags: ScheduleFlags;
  stages: StagePayload[];
}

export interface SnapshotMetrics {
  iterations: number;
  final_loss_mean: number | null;
  n_gaussians: number;
  outcome: string;
}

export interface SnapshotPayload {
  stage_index: number;
  ratio: number;
  checkpoint_path: string;
  metrics: SnapshotMetrics;
}

/** One line from /api/events; extra fields depend on the event name. */
export interface RunEvent {
  seq: number;
  ts: number;
  event: string;
  [key: string]: unknown;
}

export type ControlAction = 'pause' | 'resume' | 'skip_stage' | 'stop_at';

/** One sampled point for the live charts. */
export interface ChartPoint {
  iteration: number;
  stage_index: number;
  loss_running_mean: number | null;
  n_gaussians: number;
}
