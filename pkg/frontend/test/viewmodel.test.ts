import { describe, expect, it } from "vitest";

import { ConsoleViewModel } from "../src/viewmodel.js";
import { fakeService } from "./helpers.js";

describe("ConsoleViewModel safety invariant", () => {
  it("submit interprets but never confirms", async () => {
    const svc = fakeService();
    const vm = new ConsoleViewModel(svc.client);
    await vm.submit("set humidity to 45 percent");
    expect(vm.card?.status).toBe("pending");
    expect(svc.confirmCount).toBe(0);
    expect(svc.calls.filter((c) => c.includes("/confirm"))).toHaveLength(0);
    expect(svc.state.humidity).toBe(40);
  });

  it("only an explicit confirm executes, exactly once", async () => {
    const svc = fakeService();
    const vm = new ConsoleViewModel(svc.client);
    await vm.submit("set humidity to 45 percent");
    await vm.confirm();
    expect(svc.confirmCount).toBe(1);
    expect(vm.card?.status).toBe("executed");
    expect(vm.state?.humidity).toBe(45);

    // a second confirm on a settled card is a no-op client side
    await vm.confirm();
    expect(svc.confirmCount).toBe(1);
  });

  it("disables both buttons while the confirm is in flight", async () => {
    const svc = fakeService();
    const vm = new ConsoleViewModel(svc.client);
    await vm.submit("set humidity to 45 percent");

    const seen: Array<[boolean, boolean]> = [];
    const vmObserved = new ConsoleViewModel(svc.client, () => {
      seen.push([vmObserved.canConfirm, vmObserved.canReject]);
    });
    await vmObserved.submit("set humidity to 45 percent");
    await vmObserved.confirm();
    // first change after clicking confirm: both buttons disabled
    const afterClick = seen[1];
    expect(afterClick).toEqual([false, false]);
  });

  it("reject settles the card without touching state", async () => {
    const svc = fakeService();
    const vm = new ConsoleViewModel(svc.client);
    await vm.submit("set humidity to 45 percent");
    await vm.reject();
    expect(vm.card?.status).toBe("rejected");
    expect(svc.confirmCount).toBe(0);
    expect(svc.state.humidity).toBe(40);
  });
});

describe("ConsoleViewModel conflict handling", () => {
  it("adopts the server's terminal status on a 409", async () => {
    const svc = fakeService();
    const first = new ConsoleViewModel(svc.client);
    await first.submit("set humidity to 45 percent");
    const id = first.card!.interpretation.id;

    // another tab rejects the same id, then we try to confirm it
    await svc.client.reject(id);
    await first.confirm();
    expect(first.card?.status).toBe("rejected");
    expect(first.banner).toContain("not-pending");
    expect(svc.confirmCount).toBe(0);
  });
});

describe("ConsoleViewModel events", () => {
  it("merges state deltas and tracks the sequence number", async () => {
    const svc = fakeService();
    const vm = new ConsoleViewModel(svc.client);
    await vm.refresh();
    vm.applyEvent({ seq: 7, kind: "state-delta", payload: { clock: 12.5 } });
    expect(vm.lastEventSeq).toBe(7);
    expect(vm.state?.clock).toBe(12.5);
    expect(vm.state?.humidity).toBe(40);
  });
});
