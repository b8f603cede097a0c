// Shared fakes: an in-memory ApiClient double and payload builders.

import type { ApiClient } from '../src/api.js';
import { RunModel } from '../src/model.js';
import type {
  SchedulePayload,
  SnapshotPayload,
  StatusPayload,
} from '../src/types.js';

export function makeStatus(over: Partial<StatusPayload> = {}): StatusPayload {
  return {
    mode: 'running',
    stage_index: 1,
    ratio: 0.25,
    iteration: 40,
    loss_running_mean: 0.02,
    n_gaussians: 180,
    total_stages: 6,
    completed_stages: 1,
    ...over,
  };
}

/** refine@0, subtasks at .25/.5/.75/1, refine@1: six stages. */
export function makeSchedule(over: Partial<SchedulePayload> = {}): SchedulePayload {
  return {
    ratios: [0, 0.25, 0.5, 0.75, 1],
    difficulties: [0.08, 0.11, 0.09, 0.12],
    threshold: 0.15,
    flags: { prepend_refine: true, append_refine: true, threshold_met: true },
    stages: [
      { index: 0, ratio: 0, kind: 'refine' },
      { index: 1, ratio: 0.25, kind: 'subtask' },
      { index: 2, ratio: 0.5, kind: 'subtask' },
      { index: 3, ratio: 0.75, kind: 'subtask' },
      { index: 4, ratio: 1, kind: 'subtask' },
      { index: 5, ratio: 1, kind: 'refine' },
    ],
    ...over,
  };
}

export function makeSnapshot(
  stageIndex: number,
  ratio: number,
): SnapshotPayload {
  return {
    stage_index: stageIndex,
    ratio,
    checkpoint_path: `snapshots/${stageIndex}.ply`,
    metrics: {
      iterations: 100,
      final_loss_mean: 0.01,
      n_gaussians: 200 + stageIndex,
      outcome: 'budget',
    },
  };
}

export interface FakeApi extends ApiClient {
  calls: Array<{ method: string; args: unknown[] }>;
  statusValue: StatusPayload;
  scheduleValue: SchedulePayload;
  snapshotsValue: SnapshotPayload[];
  failNext: { status: number; message: string } | null;
}

export function makeFakeApi(): FakeApi {
  const api = {
    baseUrl: '',
    calls: [] as Array<{ method: string; args: unknown[] }>,
    statusValue: makeStatus(),
    scheduleValue: makeSchedule(),
    snapshotsValue: [makeSnapshot(0, 0), makeSnapshot(1, 0.25)],
    failNext: null as { status: number; message: string } | null,

    async maybeFail() {
      if (api.failNext) {
        const { status, message } = api.failNext;
        api.failNext = null;
        const { ApiError } = await import('../src/api.js');
        throw new ApiError(status, message);
      }
    },
    async status() {
      api.calls.push({ method: 'status', args: [] });
      await api.maybeFail();
      return { ...api.statusValue };
    },
    async schedule() {
      api.calls.push({ method: 'schedule', args: [] });
      await api.maybeFail();
      return structuredClone(api.scheduleValue);
    },
    async snapshots() {
      api.calls.push({ method: 'snapshots', args: [] });
      await api.maybeFail();
      return structuredClone(api.snapshotsValue);
    },
    renderUrl(snapshot: number, view: number, revision = 0) {
      return `/api/render?snapshot=${snapshot}&view=${view}&rev=${revision}`;
    },
    async control(action: string, stage?: number) {
      api.calls.push({ method: 'control', args: [action, stage] });
      await api.maybeFail();
      if (action === 'pause') api.statusValue.mode = 'paused';
      if (action === 'resume') api.statusValue.mode = 'running';
      return { ...api.statusValue };
    },
    async setThreshold(threshold: number) {
      api.calls.push({ method: 'setThreshold', args: [threshold] });
      await api.maybeFail();
      api.scheduleValue.threshold = threshold;
      return structuredClone(api.scheduleValue);
    },
    async viewCount() {
      return 3;
    },
    async streamEvents() {
      throw new Error('stream disabled in unit tests');
    },
  };
  return api as unknown as FakeApi;
}

export async function modelWith(api: FakeApi): Promise<RunModel> {
  const model = new RunModel(api, 1);
  await model.refreshAll();
  return model;
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
