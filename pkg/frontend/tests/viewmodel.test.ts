import { describe, expect, it } from "vitest";

import { parseServerFrame } from "../src/protocol.js";
import { ConsoleViewModel } from "../src/viewmodel.js";
import { fixture, variant } from "./wire.js";

function openVm(snapshotName?: string): ConsoleViewModel {
  const vm = new ConsoleViewModel("console", () => 42);
  vm.onOpen();
  if (snapshotName) {
    vm.onFrame(parseServerFrame(fixture(snapshotName)));
  }
  return vm;
}

describe("what the operator may press", () => {
  it("offers nothing before the link is up", () => {
    const vm = new ConsoleViewModel();
    expect(vm.enabledActions().size).toBe(0);
  });

  it("offers nothing before the first snapshot", () => {
    const vm = openVm();
    expect(vm.enabledActions().size).toBe(0);
  });

  it.each([
    ["snapshot_idle.json", ["start", "next", "enter_teach"]],
    ["snapshot_running.json", ["pause", "next", "enter_teach"]],
    ["snapshot_tap.json", ["pause", "next"]],
    ["snapshot_teach.json", ["next", "exit_teach"]],
    ["snapshot_stop.json", ["reset_stop"]],
  ])("%s gates the deck", (name, expected) => {
    const vm = openVm(name);
    expect([...vm.enabledActions()].sort()).toEqual([...expected].sort());
  });

  it("arms the tap button only while waiting on the wrist", () => {
    const vm = openVm();
    vm.onFrame(parseServerFrame(variant("snapshot_running.json", { phase: "awaiting_tap" })));
    expect(vm.enabledActions().has("simulate_tap")).toBe(true);
    expect(vm.enabledActions().has("enter_teach")).toBe(false);
  });

  it("goes dark the moment the link drops", () => {
    const vm = openVm("snapshot_running.json");
    expect(vm.enabledActions().size).toBeGreaterThan(0);
    vm.onClose();
    expect(vm.enabledActions().size).toBe(0);
  });
});

describe("command issue and resolution", () => {
  it("refuses a disabled action", () => {
    const vm = openVm("snapshot_stop.json");
    expect(vm.issueCommand("start")).toBeNull();
    expect(vm.pendingCount()).toBe(0);
  });

  it("stamps issuer and clock onto the frame", () => {
    const vm = openVm("snapshot_idle.json");
    const frame = vm.issueCommand("start");
    expect(frame).toEqual({
      type: "command",
      id: "console-1",
      action: "start",
      issuer: "console",
      client_ts: 42,
    });
  });

  it("reuses the pending id when the same button is mashed", () => {
    const vm = openVm("snapshot_idle.json");
    const first = vm.issueCommand("start");
    const second = vm.issueCommand("start");
    expect(second?.id).toBe(first?.id);
    expect(vm.pendingCount()).toBe(1);
  });

  it("gives different actions different ids", () => {
    const vm = openVm("snapshot_idle.json");
    const start = vm.issueCommand("start");
    const teach = vm.issueCommand("enter_teach");
    expect(start?.id).not.toBe(teach?.id);
    expect(vm.pendingCount()).toBe(2);
  });

  it("retires the id once the ack lands", () => {
    const vm = openVm("snapshot_idle.json");
    vm.issueCommand("start");
    vm.onFrame(parseServerFrame('{"type": "ack", "id": "console-1", "phase": "running"}'));
    expect(vm.pendingCount()).toBe(0);
    expect(vm.toasts.at(-1)).toEqual({ kind: "ack", text: "console-1 -> running" });
    expect(vm.issueCommand("start")?.id).toBe("console-2");
  });

  it("surfaces a nack reason and frees the button", () => {
    const vm = openVm("snapshot_idle.json");
    vm.issueCommand("start");
    vm.onFrame(
      parseServerFrame('{"type": "nack", "id": "console-1", "reason": "stopped; reset required"}'),
    );
    expect(vm.pendingCount()).toBe(0);
    expect(vm.toasts.at(-1)).toEqual({ kind: "nack", text: "stopped; reset required" });
  });

  it("forgets pending commands on disconnect", () => {
    const vm = openVm("snapshot_idle.json");
    vm.issueCommand("start");
    vm.onClose();
    expect(vm.pendingCount()).toBe(0);
  });
});

describe("toasts", () => {
  it("shows a service error", () => {
    const vm = openVm();
    vm.onFrame(parseServerFrame('{"type": "error", "reason": "frame is not valid JSON"}'));
    expect(vm.toasts).toEqual([{ kind: "error", text: "frame is not valid JSON" }]);
  });

  it("keeps only the latest few", () => {
    const vm = openVm();
    for (let i = 0; i < 7; i += 1) {
      vm.onFrame({ kind: "error", reason: `e${i}` });
    }
    expect(vm.toasts).toHaveLength(5);
    expect(vm.toasts[0].text).toBe("e2");
    expect(vm.toasts.at(-1)?.text).toBe("e6");
  });
});

describe("selection", () => {
  it("tracks the cue in the latest snapshot", () => {
    const vm = openVm();
    expect(vm.selectedIndex).toBeNull();
    vm.onFrame(parseServerFrame(fixture("snapshot_tap.json")));
    expect(vm.selectedIndex).toBe(4);
  });
});
