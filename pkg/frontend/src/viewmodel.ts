// DOM-free console state machine. The render layer subscribes to
// onChange and paints; all transitions live here so they can be tested
// without a browser.
//
// Safety invariant: execution can only be triggered by an explicit
// confirm() call on a pending card. submit() never executes anything.

import {
  ApiClient,
  ApiError,
  BeamlineSnapshot,
  EventFrame,
  HistoryEntry,
  PendingInterpretation,
} from "./api.js";

export type CardStatus =
  | "pending"
  | "confirming"
  | "executed"
  | "failed"
  | "rejected"
  | "expired";

export interface Card {
  interpretation: PendingInterpretation;
  status: CardStatus;
}

export class ConsoleViewModel {
  card: Card | null = null;
  state: BeamlineSnapshot | null = null;
  history: HistoryEntry[] = [];
  banner: string | null = null;
  connected = false;
  lastEventSeq = -1;

  constructor(
    private api: ApiClient,
    private onChange: () => void = () => {},
  ) {}

  get canSubmit(): boolean {
    return this.card === null || this.card.status !== "confirming";
  }

  get canConfirm(): boolean {
    return this.card !== null && this.card.status === "pending";
  }

  get canReject(): boolean {
    return this.canConfirm;
  }

  async refresh(): Promise<void> {
    try {
      this.state = await this.api.state();
      this.history = await this.api.history();
      this.banner = null;
    } catch (err) {
      this.banner = describe(err);
    }
    this.onChange();
  }

  /** Interpret only: shows the card and waits for confirm/reject. */
  async submit(text: string): Promise<void> {
    if (!text.trim() || !this.canSubmit) return;
    try {
      const interpretation = await this.api.interpret(text);
      this.card = { interpretation, status: "pending" };
      this.banner = null;
    } catch (err) {
      this.banner = describe(err);
    }
    this.onChange();
  }

  async confirm(): Promise<void> {
    if (!this.canConfirm || this.card === null) return;
    this.card.status = "confirming"; // disables both buttons immediately
    this.onChange();
    try {
      const result = await this.api.confirm(this.card.interpretation.id);
      this.card.status = result.outcome;
      this.state = result.state;
      this.history = await this.api.history();
    } catch (err) {
      this.card.status = await this.resolveConflict(err);
      this.banner = describe(err);
    }
    this.onChange();
  }

  async reject(): Promise<void> {
    if (!this.canReject || this.card === null) return;
    this.card.status = "confirming";
    this.onChange();
    try {
      await this.api.reject(this.card.interpretation.id);
      this.card.status = "rejected";
      this.history = await this.api.history();
    } catch (err) {
      this.card.status = await this.resolveConflict(err);
      this.banner = describe(err);
    }
    this.onChange();
  }

  /** On 409 the server already settled the item; show its terminal state. */
  private async resolveConflict(err: unknown): Promise<CardStatus> {
    if (err instanceof ApiError && err.status === 409) {
      const detail = err.body.detail as { status?: string } | null;
      const status = detail?.status;
      if (status === "rejected" || status === "expired") return status;
      if (status === "confirmed") return "executed";
    }
    return "pending";
  }

  applyEvent(frame: EventFrame): void {
    this.lastEventSeq = frame.seq;
    if (frame.kind === "state-delta" && this.state !== null) {
      Object.assign(this.state, frame.payload);
    }
    if (frame.kind === "execution-finished") {
      void this.refresh();
    }
    this.onChange();
  }

  setConnected(value: boolean): void {
    this.connected = value;
    this.onChange();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return err instanceof Error ? err.message : String(err);
}
