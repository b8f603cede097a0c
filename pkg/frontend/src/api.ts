// Thin fetch wrappers over the control API. Every mutation goes through
// here; the UI never fabricates server state.

import type {
  ControlAction,
  RunEvent,
  SchedulePayload,
  SnapshotPayload,
  StatusPayload,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function errorFrom(res: Response): Promise<ApiError> {
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && typeof body.error === 'string') message = body.error;
  } catch {
    // non-JSON error body, keep the status line
  }
  return new ApiError(res.status, message);
}

export class ApiClient {
  constructor(readonly baseUrl: string = '') {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path);
    if (!res.ok) throw await errorFrom(res);
    return (await res.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await errorFrom(res);
    return (await res.json()) as T;
  }

  status(): Promise<StatusPayload> {
    return this.getJson('/api/status');
  }

  schedule(): Promise<SchedulePayload> {
    return this.getJson('/api/schedule');
  }

  snapshots(): Promise<SnapshotPayload[]> {
    return this.getJson('/api/snapshots');
  }

  /** URL for a rendered still; bump `revision` to bypass the img cache. */
  renderUrl(snapshot: number, view: number, revision = 0): string {
    return `${this.baseUrl}/api/render?snapshot=${snapshot}&view=${view}&rev=${revision}`;
  }

  control(action: ControlAction, stage?: number): Promise<StatusPayload> {
    const body: Record<string, unknown> = { action };
    if (stage !== undefined) body.stage = stage;
    return this.postJson('/api/control', body);
  }

  setThreshold(threshold: number): Promise<SchedulePayload> {
    return this.postJson('/api/schedule', { threshold });
  }

  /**
   * Number of camera views the server renders. Not served directly, so
   * probe with an out-of-range view; the 400 names the valid range.
   */
  async viewCount(): Promise<number> {
    const res = await fetch(this.renderUrl(0, 1_000_000));
    if (res.ok) return 1; // absurdly many views; treat as opaque
    const err = await errorFrom(res);
    const match = /0\.\.(\d+)/.exec(err.message);
    return match ? parseInt(match[1], 10) + 1 : 1;
  }

  /**
   * Consume the ndjson event stream until it ends. Resolves on orderly
   * close, rejects on transport failure so the caller can fall back to
   * polling. Heartbeat lines are dropped here.
   */
  async streamEvents(
    onEvent: (event: RunEvent) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const res = await fetch(this.baseUrl + '/api/events', { signal });
    if (!res.ok || !res.body) throw await errorFrom(res);
    const reader = res.body.getReader();
    const decoder = new TextDecoder();
    let buffer = '';
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let newline;
      while ((newline = buffer.indexOf('\n')) >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (!line) continue;
        let parsed: RunEvent;
        try {
          parsed = JSON.parse(line) as RunEvent;
        } catch {
          continue; // torn line at shutdown
        }
        if (parsed.event === 'heartbeat') continue;
        onEvent(parsed);
      }
    }
  }
}
