// Website-energy submission and progress view: validate the form against
// the live registry, submit the job, poll its state, and turn the result
// artifact into plot-ready view models.

import { PlatformClient } from "./client.js";
import type { JobState, NodeRecord, WpmRequestDoc, WpmResultDoc } from "./types.js";

export interface WpmForm {
  urls: string[];
  deviceId: string;
  browser: string;
  reps: number;
  automation: "simple_load" | "interact";
  visual: boolean;
  perPageBudgetS?: number;
  pageSlotS?: number;
}

export const VISUAL_ACCURACY_WARNING =
  "Visual access keeps screen mirroring on during the measurement, which " +
  "adds device CPU load and can shift the absolute energy numbers.";

export function formWarnings(form: WpmForm): string[] {
  return form.visual ? [VISUAL_ACCURACY_WARNING] : [];
}

export interface DeviceOption {
  deviceId: string;
  nodeId: string;
  location: string;
  os: string;
}

// Device choices come from the live registry, never from a static list.
export function deviceOptions(nodes: NodeRecord[]): DeviceOption[] {
  const options: DeviceOption[] = [];
  for (const node of nodes) {
    if (node.state !== "online") {
      continue;
    }
    for (const device of node.devices) {
      options.push({
        deviceId: device.device_id,
        nodeId: node.id,
        location: node.location,
        os: device.os,
      });
    }
  }
  return options;
}

export function validateForm(form: WpmForm, nodes: NodeRecord[]): string[] {
  const problems: string[] = [];
  if (form.urls.length === 0) {
    problems.push("add at least one URL");
  }
  if (form.reps < 1) {
    problems.push("repetitions must be at least 1");
  }
  if (!deviceOptions(nodes).some((d) => d.deviceId === form.deviceId)) {
    problems.push(`device ${form.deviceId} is not available in the registry`);
  }
  return problems;
}

export type ViewState = "queued" | "running" | "done" | "failed" | "aborted";

export interface EnergyBar {
  url: string;
  energyJ: number;
}

export interface CpuBox {
  url: string;
  p25: number | null;
  p50: number | null;
  p75: number | null;
}

export interface ResultView {
  jobId: string;
  states: ViewState[]; // deduplicated transition history
  deviceViewActive: boolean;
  energyBars: EnergyBar[];
  cpuBoxes: CpuBox[];
  currentSeries: [number, number][];
  error: string | null;
}

const VIEW_STATE: Record<JobState, ViewState> = {
  queued: "queued",
  dispatched: "queued", // still waiting from the user's point of view
  running: "running",
  succeeded: "done",
  failed: "failed",
  aborted: "aborted",
};

export function buildResultView(
  jobId: string,
  states: ViewState[],
  doc: WpmResultDoc | null,
  error: string | null = null,
  deviceViewActive = false
): ResultView {
  const active = doc?.urls.filter((u) => !u.failed) ?? [];
  return {
    jobId,
    states,
    deviceViewActive,
    energyBars: active.map((u) => ({ url: u.url, energyJ: u.energy_j_median ?? 0 })),
    cpuBoxes: active.map((u) => ({
      url: u.url,
      p25: u.cpu_p25,
      p50: u.cpu_p50,
      p75: u.cpu_p75,
    })),
    currentSeries: doc?.current_series ?? [],
    error,
  };
}

export interface WatchOptions {
  pollMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onUpdate?: (state: ViewState) => void;
  jobId?: string;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class WpmWatcher {
  constructor(private client: PlatformClient) {}

  requestDoc(form: WpmForm): WpmRequestDoc {
    return {
      url_list: form.urls,
      device_id: form.deviceId,
      browser: form.browser,
      reps: form.reps,
      power: true,
      visual: form.visual,
      automation: form.automation,
      per_page_budget_s: form.perPageBudgetS ?? 30,
      page_slot_s: form.pageSlotS ?? 120,
    };
  }

  async submitAndWatch(form: WpmForm, opts: WatchOptions = {}): Promise<ResultView> {
    const nodes = await this.client.listNodes();
    const problems = validateForm(form, nodes);
    if (problems.length > 0) {
      throw new Error(`invalid request: ${problems.join("; ")}`);
    }
    const jobId = await this.client.submitJob({
      job_id: opts.jobId ?? `wpm-${Date.now()}`,
      device_id: form.deviceId,
      owner: "console",
      steps: [{ name: "wpm", request: this.requestDoc(form) }],
    });

    const sleep = opts.sleep ?? defaultSleep;
    const states: ViewState[] = [];
    let deviceViewActive = false;
    for (;;) {
      const job = await this.client.job(jobId);
      const view = VIEW_STATE[job.state];
      if (states[states.length - 1] !== view) {
        states.push(view);
        opts.onUpdate?.(view);
      }
      // With visual access requested, the device pane turns on once the
      // run is actually on the device (device setup done, loads starting).
      if (form.visual && view === "running") {
        deviceViewActive = true;
      }
      if (view === "done") {
        const doc = (await this.client.artifact(jobId, "wpm-result.json")) as WpmResultDoc;
        return buildResultView(jobId, states, doc, null, deviceViewActive);
      }
      if (view === "failed" || view === "aborted") {
        return buildResultView(jobId, states, null, job.error ?? view, deviceViewActive);
      }
      await sleep(opts.pollMs ?? 2000);
    }
  }
}
