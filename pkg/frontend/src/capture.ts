// Input capture: translate DOM-level events from the mirror view into the
// controller's RecordedEvent shape, batch them into <=50 ms windows, and
// POST them strictly in order. A failed POST is retried before anything
// newer is sent, so the recording session never sees reordered input.

import type { RecordedEvent } from "./types.js";

export interface DomishEvent {
  type: "mousedown" | "mouseup" | "mousemove" | "keydown" | "keyup";
  offsetX?: number;
  offsetY?: number;
  key?: string;
  timeMs: number;
}

const KIND_BY_TYPE: Record<DomishEvent["type"], RecordedEvent["kind"]> = {
  mousedown: "mouse_down",
  mouseup: "mouse_up",
  mousemove: "mouse_move",
  keydown: "key_down",
  keyup: "key_up",
};

export interface CaptureOptions {
  viewW: number;
  viewH: number;
  post: (events: RecordedEvent[]) => Promise<void>;
  batchWindowMs?: number;
  retryDelayMs?: number;
  maxRetries?: number;
  sleep?: (ms: number) => Promise<void>;
  // Live drive: mirror the same events onto the device while recording.
  liveDrive?: (event: RecordedEvent) => void;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class InputCapture {
  enabled = true;
  postedBatches = 0;
  failedBatches = 0;

  private pending: RecordedEvent[] = [];
  private batchStartMs: number | null = null;
  private originMs: number | null = null;
  private queue: RecordedEvent[][] = [];
  private draining: Promise<void> = Promise.resolve();

  constructor(private opts: CaptureOptions) {}

  private get windowMs() {
    return this.opts.batchWindowMs ?? 50;
  }

  // Translate and stage one event; returns the staged record.
  handle(ev: DomishEvent): RecordedEvent | null {
    if (!this.enabled) {
      return null;
    }
    if (this.originMs === null) {
      this.originMs = ev.timeMs;
    }
    const record: RecordedEvent = {
      t_ms: ev.timeMs - this.originMs,
      kind: KIND_BY_TYPE[ev.type],
      view_w: this.opts.viewW,
      view_h: this.opts.viewH,
    };
    if (ev.type.startsWith("mouse")) {
      if (ev.offsetX === undefined || ev.offsetY === undefined) {
        return null;
      }
      // The pointer can slip past the canvas edge mid-gesture; clamp into
      // the view so the controller never rejects the event.
      record.x = Math.min(Math.max(ev.offsetX, 0), this.opts.viewW);
      record.y = Math.min(Math.max(ev.offsetY, 0), this.opts.viewH);
    } else {
      if (!ev.key) {
        return null;
      }
      record.key = ev.key;
    }
    if (this.batchStartMs !== null && ev.timeMs - this.batchStartMs > this.windowMs) {
      this.closeBatch();
    }
    if (this.batchStartMs === null) {
      this.batchStartMs = ev.timeMs;
    }
    this.pending.push(record);
    this.opts.liveDrive?.(record);
    return record;
  }

  private closeBatch() {
    if (this.pending.length > 0) {
      this.queue.push(this.pending);
      this.pending = [];
      this.pump();
    }
    this.batchStartMs = null;
  }

  // Close the open window and wait until every queued batch is delivered.
  async flush(): Promise<void> {
    this.closeBatch();
    await this.draining;
  }

  private pump() {
    this.draining = this.draining.then(() => this.drainQueue());
  }

  private async drainQueue(): Promise<void> {
    const sleep = this.opts.sleep ?? defaultSleep;
    const maxRetries = this.opts.maxRetries ?? 5;
    while (this.queue.length > 0) {
      const batch = this.queue[0];
      let attempt = 0;
      for (;;) {
        try {
          await this.opts.post(batch);
          this.postedBatches += 1;
          break;
        } catch (err) {
          attempt += 1;
          this.failedBatches += 1;
          if (attempt > maxRetries) {
            throw err;
          }
          await sleep((this.opts.retryDelayMs ?? 200) * attempt);
        }
      }
      this.queue.shift();
    }
  }
}
