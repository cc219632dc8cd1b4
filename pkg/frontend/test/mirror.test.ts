import { describe, expect, it } from "vitest";

import { MirrorView } from "../src/mirror.js";
import type { FrameInfo } from "../src/types.js";

const SCREEN = { w: 720, h: 1280 };

function frame(seq: number): FrameInfo {
  return { seq, digest: `d${seq}`, size: 4166 };
}

function view(pull: (since: number) => Promise<FrameInfo[]>) {
  return new MirrorView({
    deviceScreen: SCREEN, maxW: 360, maxH: 640, pull, sleep: () => Promise.resolve(),
  });
}

describe("MirrorView", () => {
  it("renders frames in order", () => {
    const v = view(async () => []);
    v.ingest([frame(1), frame(2), frame(3)]);
    expect(v.rendered.map((f) => f.seq)).toEqual([1, 2, 3]);
    expect(v.gaps).toEqual([]);
  });

  it("tolerates dropped frames and logs the gap", () => {
    const v = view(async () => []);
    v.ingest([frame(1)]);
    v.ingest([frame(3)]);
    expect(v.rendered.map((f) => f.seq)).toEqual([1, 3]);
    expect(v.gaps).toEqual([[1, 3]]);
  });

  it("drops stale and duplicate frames", () => {
    const v = view(async () => []);
    v.ingest([frame(5)]);
    v.ingest([frame(4), frame(5), frame(6)]);
    expect(v.rendered.map((f) => f.seq)).toEqual([5, 6]);
  });

  it("flips to reconnecting on pull failure and recovers", async () => {
    let healthy = false;
    const v = view(async (since) => {
      if (!healthy) {
        throw new Error("controller offline");
      }
      return [frame(since + 1)];
    });
    expect(await v.pollOnce()).toBe(false);
    expect(v.status).toBe("reconnecting");
    healthy = true;
    expect(await v.pollOnce()).toBe(true);
    expect(v.status).toBe("live");
    expect(v.rendered).toHaveLength(1);
  });

  it("sizes the view to the device aspect ratio", () => {
    const v = view(async () => []);
    expect(v.viewSize).toEqual({ w: 360, h: 640 });
  });
});
