// Shared mock-service plumbing: an in-memory fake of the beamline
// service driven through the ApiClient's injectable fetch.

import { ApiClient, BeamlineSnapshot, EventFrame } from "../src/api.js";

export function freshSnapshot(): BeamlineSnapshot {
  return {
    motor_x: 0,
    motor_y: 0,
    temperature: 25,
    temperature_setpoint: 25,
    ramp: 0,
    humidity: 40,
    sample_name: null,
    clock: 0,
    status: "idle",
    ramping: false,
  };
}

export interface FakeService {
  client: ApiClient;
  calls: string[];
  state: BeamlineSnapshot;
  events: EventFrame[];
  confirmCount: number;
  failNextFetch: boolean;
}

export function fakeService(): FakeService {
  const svc: FakeService = {
    client: null as unknown as ApiClient,
    calls: [],
    state: freshSnapshot(),
    events: [],
    confirmCount: 0,
    failNextFetch: false,
  };
  let nextId = 0;
  const pending = new Map<string, string>(); // id -> status

  const respond = (status: number, body: unknown): Response =>
    ({
      ok: status < 400,
      status,
      json: async () => body,
    }) as Response;

  const fetchFn = async (url: string, init?: RequestInit) => {
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    svc.calls.push(`${init?.method ?? "GET"} ${path}`);
    if (svc.failNextFetch) {
      svc.failNextFetch = false;
      throw new Error("network down");
    }
    const body = init?.body ? JSON.parse(init.body as string) : {};
    if (path === "/interpret" || path === "/script") {
      const id = `id-${nextId++}`;
      pending.set(id, "pending");
      return respond(200, {
        id,
        text: body.text,
        rendered: "set_humidity(target=45.0)",
        spans: [
          {
            entity: "HUMIDITY",
            prefix: "B",
            surface: "45",
            start: 4,
            end: 5,
            value: 45,
          },
        ],
        warnings: [],
        status: "pending",
      });
    }
    if (path === "/confirm") {
      const status = pending.get(body.id);
      if (status === undefined) {
        return respond(404, { code: "unknown-id", message: "?", detail: null });
      }
      if (status !== "pending") {
        return respond(409, {
          code: "not-pending",
          message: `interpretation is ${status}`,
          detail: { status },
        });
      }
      pending.set(body.id, "confirmed");
      svc.confirmCount += 1;
      svc.state = { ...svc.state, humidity: 45 };
      return respond(200, {
        id: body.id,
        status: "confirmed",
        outcome: "executed",
        state: svc.state,
        log_events: 3,
        measurements: 0,
      });
    }
    if (path === "/reject") {
      const status = pending.get(body.id);
      if (status === undefined) {
        return respond(404, { code: "unknown-id", message: "?", detail: null });
      }
      if (status !== "pending") {
        return respond(409, {
          code: "not-pending",
          message: `interpretation is ${status}`,
          detail: { status },
        });
      }
      pending.set(body.id, "rejected");
      return respond(200, { id: body.id, status: "rejected" });
    }
    if (path === "/state") {
      return respond(200, svc.state);
    }
    if (path.startsWith("/history")) {
      return respond(200, { entries: [] });
    }
    if (path.startsWith("/events")) {
      // yield a macrotask like a real long-poll would, so callers'
      // timers can fire between polls
      await new Promise((r) => setTimeout(r, 0));
      const since = Number(new URL(url).searchParams.get("since") ?? "-1");
      return respond(200, {
        events: svc.events.filter((e) => e.seq > since),
        last_seq: svc.events.length - 1,
      });
    }
    return respond(404, { code: "unknown", message: path, detail: null });
  };

  svc.client = new ApiClient("http://service.test", fetchFn);
  return svc;
}
