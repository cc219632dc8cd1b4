// HTTP client for the access server and controller JSON APIs. The fetch
// implementation is injected so tests can run against a scripted server.

import type {
  DeviceSummary,
  FrameInfo,
  JobInfo,
  NodeRecord,
  RecordedEvent,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string }
) => Promise<{ ok: boolean; status: number; json(): Promise<any> }>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class PlatformClient {
  constructor(
    private serverUrl: string,
    private principal: string = "root",
    private fetchFn: FetchLike = fetch as unknown as FetchLike
  ) {}

  private async call(base: string, method: string, path: string, body?: unknown) {
    const resp = await this.fetchFn(`${base}${path}`, {
      method,
      headers: {
        "Content-Type": "application/json",
        "X-Principal": this.principal,
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, doc?.error ?? `HTTP ${resp.status}`);
    }
    return doc;
  }

  private server(method: string, path: string, body?: unknown) {
    return this.call(this.serverUrl, method, path, body);
  }

  // ---- access server

  async listNodes(state?: string): Promise<NodeRecord[]> {
    const query = state ? `?state=${encodeURIComponent(state)}` : "";
    const doc = await this.server("GET", `/nodes${query}`);
    return doc.nodes;
  }

  async listDevices(nodeId: string): Promise<{ devices: DeviceSummary[]; stale: boolean }> {
    return this.server("GET", `/nodes/${nodeId}/devices`);
  }

  async submitJob(spec: unknown): Promise<string> {
    const doc = await this.server("POST", "/jobs", spec);
    return doc.job_id;
  }

  async job(jobId: string): Promise<JobInfo> {
    return this.server("GET", `/jobs/${jobId}`);
  }

  async artifact(jobId: string, name: string): Promise<any> {
    return this.server("GET", `/jobs/${jobId}/artifacts/${name}`);
  }

  async abortJob(jobId: string): Promise<JobInfo> {
    return this.server("POST", `/jobs/${jobId}/abort`);
  }

  // ---- controller (mirroring + replay capture), reached via its own URL

  async postInput(
    controllerUrl: string,
    body: { action?: string; session_id?: string; device_id?: string; events?: RecordedEvent[] }
  ): Promise<any> {
    return this.call(controllerUrl, "POST", "/input", body);
  }

  async frames(controllerUrl: string, deviceId: string, count = 1): Promise<FrameInfo[]> {
    const doc = await this.call(
      controllerUrl,
      "GET",
      `/frames?device_id=${encodeURIComponent(deviceId)}&count=${count}`
    );
    return doc.frames;
  }

  async executeCommand(controllerUrl: string, deviceId: string, command: unknown): Promise<any> {
    return this.call(controllerUrl, "POST", "/execute_command", {
      device_id: deviceId,
      command,
    });
  }

  // Generic controller POST used by the toolbar's documented routes.
  async executeToolbar(controllerUrl: string, path: string, body: unknown): Promise<any> {
    return this.call(controllerUrl, "POST", path, body);
  }
}
