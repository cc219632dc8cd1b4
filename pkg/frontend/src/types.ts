// Wire types shared with the platform's HTTP/JSON interfaces.

export interface NodeRecord {
  id: string;
  address: string;
  dns_name: string;
  state: "online" | "offline";
  last_seen: number | null;
  location: string;
  devices: DeviceSummary[];
}

export interface DeviceSummary {
  device_id: string;
  os: "android" | "ios";
  screen: [number, number];
  adb_available: boolean;
  address: string;
  profile?: string;
  battery_mah?: number;
}

// Raw captured input, as the controller's /input route expects it.
export interface RecordedEvent {
  t_ms: number;
  kind: "mouse_down" | "mouse_up" | "mouse_move" | "key_down" | "key_up";
  x?: number;
  y?: number;
  key?: string;
  view_w: number;
  view_h: number;
}

export interface FrameInfo {
  seq: number;
  digest: string;
  size: number;
}

export type JobState =
  | "queued"
  | "dispatched"
  | "running"
  | "succeeded"
  | "failed"
  | "aborted";

export interface JobInfo {
  job_id: string;
  state: JobState;
  vantage_id: string | null;
  error: string | null;
  artifacts: string[];
}

export interface WpmRequestDoc {
  url_list: string[];
  device_id: string;
  browser: string;
  reps: number;
  power: boolean;
  visual: boolean;
  automation: "simple_load" | "interact";
  per_page_budget_s: number;
  page_slot_s: number;
}

export interface WpmUrlDoc {
  url: string;
  failed: boolean;
  energy_j_median: number | null;
  page_bytes_median: number | null;
  cpu_p25: number | null;
  cpu_p50: number | null;
  cpu_p75: number | null;
}

export interface WpmResultDoc {
  schema: string;
  urls: WpmUrlDoc[];
  trace_id: string | null;
  total_energy_j: number | null;
  idle_energy_j: number | null;
  current_series: [number, number][];
  step_log: string[];
}
