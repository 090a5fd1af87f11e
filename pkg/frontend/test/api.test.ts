import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { fakeService } from "./helpers.js";

describe("ApiClient", () => {
  it("posts JSON bodies with the right shapes", async () => {
    const bodies: Array<{ url: string; body: unknown }> = [];
    const client = new ApiClient("http://s", async (url, init) => {
      bodies.push({ url, body: JSON.parse((init?.body as string) ?? "{}") });
      return {
        ok: true,
        status: 200,
        json: async () => ({ entries: [] }),
      } as Response;
    });
    await client.interpret("warm up").catch(() => {});
    await client.confirm("abc").catch(() => {});
    await client.history(5).catch(() => {});
    expect(bodies[0]).toEqual({
      url: "http://s/interpret",
      body: { text: "warm up" },
    });
    expect(bodies[1]).toEqual({ url: "http://s/confirm", body: { id: "abc" } });
    expect(bodies[2].url).toBe("http://s/history?limit=5");
  });

  it("raises ApiError with the structured body on non-2xx", async () => {
    const client = new ApiClient("http://s", async () => {
      return {
        ok: false,
        status: 422,
        json: async () => ({
          code: "nothing-to-execute",
          message: "script is empty",
          detail: null,
        }),
      } as Response;
    });
    const err = await client.confirm("x").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).body.code).toBe("nothing-to-execute");
    expect((err as ApiError).message).toContain("script is empty");
  });

  it("round-trips through the fake service", async () => {
    const svc = fakeService();
    const pending = await svc.client.interpret("set humidity to 45 percent");
    expect(pending.status).toBe("pending");
    expect(pending.spans[0].entity).toBe("HUMIDITY");
    const result = await svc.client.confirm(pending.id);
    expect(result.outcome).toBe("executed");
    expect(result.state.humidity).toBe(45);
    const state = await svc.client.state();
    expect(state.humidity).toBe(45);
  });
});
