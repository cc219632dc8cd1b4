// The console toolbar: the convenient subset of the platform API exposed
// above the interactive mirror area. Everything here goes through the
// controller's documented routes; the console never mutates state another
// way.

import { PlatformClient } from "./client.js";

export class Toolbar {
  constructor(
    private client: PlatformClient,
    private controllerUrl: string,
    private deviceId: string
  ) {}

  async setMirroring(on: boolean): Promise<boolean> {
    const link = await this.client
      .executeToolbar(this.controllerUrl, "/device_mirroring", {
        device_id: this.deviceId,
        state: on ? "on" : "off",
      });
    return link.mirroring === "on";
  }

  async setBrightness(value: number): Promise<number> {
    const report = await this.client.executeToolbar(
      this.controllerUrl,
      "/device_setup",
      { device_id: this.deviceId, brightness: value }
    );
    return report.brightness;
  }

  async startRecording(): Promise<string> {
    const doc = await this.client.postInput(this.controllerUrl, {
      action: "open",
      device_id: this.deviceId,
    });
    return doc.session_id;
  }

  async stopRecording(sessionId: string): Promise<number> {
    const doc = await this.client.postInput(this.controllerUrl, {
      action: "close",
      session_id: sessionId,
    });
    return doc.events;
  }
}
