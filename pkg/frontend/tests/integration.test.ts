// Round-trip against a real run: `proedit run --serve --linger` is spawned
// once, then the same model/view code the page uses drives it over HTTP.

import { type ChildProcess, spawn } from 'node:child_process';
import { mkdtemp, writeFile } from 'node:fs/promises';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { ControlPanel } from '../src/dialog.js';
import { Gallery } from '../src/gallery.js';
import { RunModel } from '../src/model.js';
import { Timeline } from '../src/timeline.js';
import type { RunEvent } from '../src/types.js';

const PROEDIT = process.env.PROEDIT_BIN ?? 'proedit';
const PNG_MAGIC = [0x89, 0x50, 0x4e, 0x47];

const RUN_CONFIG = {
  scene: 'texture',
  scene_size: 40,
  scene_seed: 3,
  n_views: 3,
  width: 32,
  height: 32,
  threshold: 10.0, // coarse start: {0,1} plus the two refine stages
  preset: null,
  fos_scale: 0.0,
  seed: 0,
  deterministic: true,
  max_iters_per_stage: 400,
  window: 30,
  patience: 1000, // never latch convergence: stages take a predictable time
  warmup_iters: 1000,
  maintenance_interval: 200,
};

let child: ChildProcess;
let childOutput = '';
let api: ApiClient;

function mount(): HTMLElement {
  const root = document.createElement('div');
  document.body.appendChild(root);
  return root;
}

function waitForServeLine(proc: ChildProcess, timeoutMs: number): Promise<string> {
  return new Promise((resolve, reject) => {
    const timer = setTimeout(
      () => reject(new Error(`no serve line within ${timeoutMs}ms:\n${childOutput}`)),
      timeoutMs,
    );
    proc.stdout!.on('data', (chunk: Buffer) => {
      childOutput += chunk.toString();
      const match = /serving control API at (http:\/\/[\d.]+:\d+)/.exec(childOutput);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]);
      }
    });
    proc.on('exit', (code) => {
      clearTimeout(timer);
      reject(new Error(`run exited early (${code}):\n${childOutput}`));
    });
  });
}

beforeAll(async () => {
  const dir = await mkdtemp(join(tmpdir(), 'studio-'));
  const configPath = join(dir, 'edit.json');
  await writeFile(configPath, JSON.stringify(RUN_CONFIG, null, 2));
  child = spawn(
    PROEDIT,
    [
      'run',
      '--config',
      configPath,
      '--out',
      join(dir, 'run'),
      '--serve',
      '127.0.0.1:0',
      '--linger',
      '300',
    ],
    { env: { ...process.env, PYTHONUNBUFFERED: '1' } },
  );
  child.stderr!.on('data', (chunk: Buffer) => {
    childOutput += chunk.toString();
  });
  const base = await waitForServeLine(child, 60_000);
  api = new ApiClient(base);
}, 90_000);

afterAll(() => {
  child?.kill('SIGTERM');
});

describe.sequential('live run round-trip', () => {
  it(
    'steers a run end to end through the page components',
    async () => {
      // freeze the run right away so every later step is race-free
      const paused = await api.control('pause');
      expect(paused.mode).toBe('paused');

      const model = new RunModel(api);
      await model.refreshAll();

      // --- timeline mirrors /api/schedule exactly --------------------------
      const timelineRoot = mount();
      const timeline = new Timeline(timelineRoot, model);
      let served = await api.schedule();
      expect(served.stages.length).toBe(3); // refine, subtask r=1, refine
      let cells = timelineRoot.querySelectorAll('[data-stage]');
      expect(
        [...cells].map((c) => c.getAttribute('data-stage')),
      ).toEqual(served.stages.map((s) => String(s.index)));

      // --- pause -> set_threshold -> resume repaints the tail --------------
      const coarse = served.difficulties[0];
      expect(coarse).toBeGreaterThan(0);
      const fine = coarse * 0.4;
      const panelRoot = mount();
      const panel = new ControlPanel(panelRoot, model);
      expect(
        panelRoot.querySelector<HTMLFieldSetElement>('.threshold-dialog')!.disabled,
      ).toBe(false); // paused, so the dialog is open for edits
      panelRoot.querySelector<HTMLInputElement>('#threshold-input')!.value = String(fine);
      await panel.applyThreshold();

      served = await api.schedule();
      expect(served.threshold).toBeCloseTo(fine, 12);
      expect(served.stages.length).toBeGreaterThan(3);
      expect(served.stages[0]).toMatchObject({ index: 0, ratio: 0 }); // prefix kept
      for (const difficulty of served.difficulties) {
        expect(difficulty).toBeLessThanOrEqual(fine + 1e-12);
      }
      // the timeline repainted to the served tail, nothing invented
      cells = timelineRoot.querySelectorAll('[data-stage]');
      expect(
        [...cells].map((c) => c.getAttribute('data-stage')),
      ).toEqual(served.stages.map((s) => String(s.index)));
      expect(model.schedule!.stages).toEqual(served.stages);

      // --- stop_at via a timeline click ------------------------------------
      const stopTarget = served.stages[served.stages.length - 2].index;
      timelineRoot
        .querySelector(`[data-stage="${stopTarget}"]`)!
        .dispatchEvent(new MouseEvent('click', { bubbles: true }));
      await new Promise((r) => setTimeout(r, 50));
      expect(timelineRoot.querySelector('.timeline-notice')!.textContent).toContain(
        `will stop after stage ${stopTarget}`,
      );

      // --- resume and ride the event stream to the end ----------------------
      const events: RunEvent[] = [];
      const streamDone = api.streamEvents((event) => events.push(event));
      panelRoot
        .querySelector('button[data-action="resume"]')!
        .dispatchEvent(new MouseEvent('click', { bubbles: true }));
      await new Promise((r) => setTimeout(r, 50));
      expect(model.status!.mode).toBe('running');

      await streamDone; // server closes the stream once the run finishes
      const names = events.map((e) => e.event);
      expect(names).toContain('stage_started');
      expect(names).toContain('snapshot_written');
      expect(names).toContain('schedule_adjusted');
      expect(names).toContain('finished');

      // --- the run halted after the chosen stage ---------------------------
      await model.refreshAll();
      expect(model.status!.mode).toBe('finished');
      const snapshots = model.visibleSnapshots();
      expect(snapshots.length).toBe(stopTarget + 1);
      expect(snapshots[snapshots.length - 1].stage_index).toBe(stopTarget);
      expect(model.status!.total_stages).toBeGreaterThan(stopTarget + 1);

      // --- gallery slider fetches the snapshot the server rendered ---------
      const galleryRoot = mount();
      const gallery = new Gallery(galleryRoot, model);
      await new Promise((r) => setTimeout(r, 200)); // let the view probe land
      gallery.render();
      const slider = galleryRoot.querySelector<HTMLInputElement>(
        '[data-role="level-slider"]',
      )!;
      expect(slider.max).toBe(String(snapshots.length - 1));
      expect(gallery.current()!.snapshot.stage_index).toBe(stopTarget);

      const gridImgs = [
        ...galleryRoot.querySelectorAll<HTMLImageElement>('.gallery-grid img'),
      ];
      expect(gridImgs.length).toBe(RUN_CONFIG.n_views);
      const src = gridImgs[0].getAttribute('src')!;
      expect(src).toBe(api.renderUrl(stopTarget, 0, model.snapshotRevision));

      const res = await fetch(src);
      expect(res.status).toBe(200);
      expect(res.headers.get('content-type')).toBe('image/png');
      const bytes = new Uint8Array(await res.arrayBuffer());
      expect([...bytes.slice(0, 4)]).toEqual(PNG_MAGIC);
      // the rev query only busts caches; the content is the snapshot's
      const again = new Uint8Array(
        await (await fetch(api.renderUrl(stopTarget, 0, 999))).arrayBuffer(),
      );
      expect(Buffer.from(again).equals(Buffer.from(bytes))).toBe(true);

      // --- steering a finished run is rejected and surfaced ----------------
      await timeline.requestStop(stopTarget);
      expect(timelineRoot.querySelector('.timeline-notice')!.textContent).toContain(
        'server:',
      );
    },
    150_000,
  );
});
