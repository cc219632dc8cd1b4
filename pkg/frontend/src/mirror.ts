// Mirror view: consume the controller's frame stream in order. Dropped
// frames are tolerated (the next one simply renders), sequence gaps are
// logged, and pull failures flip the view into a visible reconnecting
// state with backoff.

import { fitView, Size } from "./coords.js";
import type { FrameInfo } from "./types.js";

export type MirrorStatus = "connecting" | "live" | "reconnecting";

export interface MirrorOptions {
  deviceScreen: Size;
  maxW: number;
  maxH: number;
  pull: (sinceSeq: number) => Promise<FrameInfo[]>;
  onRender?: (frame: FrameInfo) => void;
  onGap?: (from: number, to: number) => void;
  backoffMs?: number;
  maxBackoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class MirrorView {
  status: MirrorStatus = "connecting";
  lastSeq = 0;
  rendered: FrameInfo[] = [];
  gaps: Array<[number, number]> = [];
  viewSize: Size;

  private stopped = false;
  private failures = 0;

  constructor(private opts: MirrorOptions) {
    // The view always preserves the device aspect ratio.
    this.viewSize = fitView(opts.deviceScreen, opts.maxW, opts.maxH);
  }

  ingest(frames: FrameInfo[]) {
    for (const frame of frames) {
      if (frame.seq <= this.lastSeq) {
        continue; // stale or duplicate
      }
      if (this.lastSeq > 0 && frame.seq > this.lastSeq + 1) {
        this.gaps.push([this.lastSeq, frame.seq]);
        this.opts.onGap?.(this.lastSeq, frame.seq);
      }
      this.lastSeq = frame.seq;
      this.rendered.push(frame);
      this.opts.onRender?.(frame);
    }
  }

  async pollOnce(): Promise<boolean> {
    try {
      const frames = await this.opts.pull(this.lastSeq);
      this.ingest(frames);
      this.status = "live";
      this.failures = 0;
      return true;
    } catch {
      this.status = "reconnecting";
      this.failures += 1;
      return false;
    }
  }

  // Pull until stop() is called; failed pulls back off exponentially.
  async run(): Promise<void> {
    const sleep = this.opts.sleep ?? defaultSleep;
    const base = this.opts.backoffMs ?? 250;
    const max = this.opts.maxBackoffMs ?? 5000;
    while (!this.stopped) {
      const ok = await this.pollOnce();
      const delay = ok ? base : Math.min(max, base * 2 ** this.failures);
      await sleep(delay);
    }
  }

  stop() {
    this.stopped = true;
  }
}
