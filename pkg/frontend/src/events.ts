// Event-stream subscription over the long-pollable /events endpoint.
// Tracks the last applied sequence number; on any failure it reconnects
// and resumes from that number, so no frames are lost or reordered.

import type { ApiClient, EventFrame } from "./api.js";

export interface StreamOptions {
  pollTimeoutSeconds?: number;
  retryDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export class EventStream {
  lastSeq = -1;
  connected = false;
  private running = false;

  constructor(
    private api: ApiClient,
    private onFrame: (frame: EventFrame) => void,
    private onStatus: (connected: boolean) => void = () => {},
    private options: StreamOptions = {},
  ) {}

  /** Poll until stop(); resolves when stopped. */
  async run(): Promise<void> {
    const timeout = this.options.pollTimeoutSeconds ?? 25;
    const retryMs = this.options.retryDelayMs ?? 1000;
    const sleep =
      this.options.sleep ?? ((ms) => new Promise((r) => setTimeout(r, ms)));
    this.running = true;
    while (this.running) {
      try {
        const batch = await this.api.events(this.lastSeq, timeout);
        this.setConnected(true);
        for (const frame of batch.events) {
          if (frame.seq <= this.lastSeq) continue; // replay after resume
          if (frame.seq !== this.lastSeq + 1 && this.lastSeq >= 0) {
            // a gap means we missed frames; refetch from where we were
            break;
          }
          this.lastSeq = frame.seq;
          this.onFrame(frame);
        }
      } catch {
        this.setConnected(false);
        if (this.running) await sleep(retryMs);
      }
    }
  }

  stop(): void {
    this.running = false;
  }

  private setConnected(value: boolean): void {
    if (this.connected !== value) {
      this.connected = value;
      this.onStatus(value);
    }
  }
}
