// Typed client for the beamline service HTTP API. All requests go through
// an injectable fetch so tests can run without a server.

export interface EntitySpan {
  entity: string;
  prefix: "B" | "I";
  surface: string;
  start: number;
  end: number;
  value: unknown;
}

export interface PendingInterpretation {
  id: string;
  text: string;
  rendered: string;
  spans: EntitySpan[];
  warnings: string[];
  status: "pending" | "confirmed" | "rejected" | "expired";
}

export interface BeamlineSnapshot {
  motor_x: number;
  motor_y: number;
  temperature: number;
  temperature_setpoint: number;
  ramp: number;
  humidity: number;
  sample_name: string | null;
  clock: number;
  status: "idle" | "executing";
  ramping: boolean;
}

export interface HistoryEntry {
  id: string;
  text: string;
  rendered: string;
  outcome: "executed" | "rejected" | "failed";
  log_events: number;
  measurements: number;
  completed_at: number;
}

export interface ConfirmResult {
  id: string;
  status: string;
  outcome: "executed" | "failed";
  state: BeamlineSnapshot;
  log_events: number;
  measurements: number;
}

export interface EventFrame {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface ServiceError {
  code: string;
  message: string;
  detail: unknown;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ServiceError,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchFn(this.baseUrl + path, init);
    const data = await res.json();
    if (!res.ok) {
      throw new ApiError(res.status, data as ServiceError);
    }
    return data as T;
  }

  interpret(text: string): Promise<PendingInterpretation> {
    return this.request("POST", "/interpret", { text });
  }

  script(text: string): Promise<PendingInterpretation> {
    return this.request("POST", "/script", { text });
  }

  confirm(id: string): Promise<ConfirmResult> {
    return this.request("POST", "/confirm", { id });
  }

  reject(id: string): Promise<{ id: string; status: string }> {
    return this.request("POST", "/reject", { id });
  }

  state(): Promise<BeamlineSnapshot> {
    return this.request("GET", "/state");
  }

  async history(limit = 20): Promise<HistoryEntry[]> {
    const data = await this.request<{ entries: HistoryEntry[] }>(
      "GET",
      `/history?limit=${limit}`,
    );
    return data.entries;
  }

  events(
    since: number,
    timeoutSeconds: number,
  ): Promise<{ events: EventFrame[]; last_seq: number }> {
    return this.request(
      "GET",
      `/events?since=${since}&timeout=${timeoutSeconds}`,
    );
  }
}
