import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionState, visibleAnnotations } from "../src/state.js";
import { makeFakeService } from "./fake_service.js";

const makeState = () => {
  const service = makeFakeService();
  const state = new SessionState(new ApiClient("", service.fetch), "tester");
  return { service, state };
};

describe("SessionState", () => {
  it("loads scans and opens one", async () => {
    const { state } = makeState();
    await state.loadScans();
    expect(state.scans).toHaveLength(2);
    await state.openScan(2);
    expect(state.currentScan?.scan_id).toBe(2);
    expect(state.decisionState().get("G1 1H+")).toBeNull();
  });

  it("applies an optimistic decision that the server confirms", async () => {
    const { service, state } = makeState();
    await state.openScan(2);
    const ok = await state.decide(state.currentScan!.annotations[0], true);
    expect(ok).toBe(true);
    expect(state.decisionState().get("G1 1H+")).toBe(true);
    expect(service.selections).toHaveLength(1);
    // reload mirrors the server exactly
    await state.reload();
    expect(state.decisionState().get("G1 1H+")).toBe(true);
  });

  it("rolls back and surfaces the error when the server rejects", async () => {
    const { service, state } = makeState();
    await state.openScan(2);
    service.failNextDecision = 409;
    const ok = await state.decide(state.currentScan!.annotations[0], true);
    expect(ok).toBe(false);
    expect(state.decisionState().get("G1 1H+")).toBeNull();
    expect(state.lastError).toMatch(/rejected by test/);
    expect(service.selections).toHaveLength(0);
  });

  it("re-decision updates, not duplicates, the current state", async () => {
    const { service, state } = makeState();
    await state.openScan(2);
    await state.decide(state.currentScan!.annotations[0], true);
    await state.decide(state.currentScan!.annotations[0], false);
    expect(state.decisionState().get("G1 1H+")).toBe(false);
    expect(service.selections).toHaveLength(1);
    expect(service.selections[0].approved).toBe(false);
  });

  it("train reloads the scan so probabilities appear", async () => {
    const { service, state } = makeState();
    await state.loadScans();
    await state.openScan(2);
    await state.decide(state.currentScan!.annotations[0], true);
    expect(state.currentScan!.annotations[0].probability).toBeNull();
    await state.train();
    expect(service.trainCalls).toBe(1);
    expect(state.currentScan!.annotations[0].probability).toBeCloseTo(0.42);
    expect(state.busy).toBe(false);
  });

  it("notifies subscribers on every mutation", async () => {
    const { state } = makeState();
    let calls = 0;
    state.subscribe(() => (calls += 1));
    await state.loadScans();
    await state.openScan(2);
    state.setFilter({ onlyUndecided: true });
    expect(calls).toBe(3);
  });
});

describe("visibleAnnotations", () => {
  const rows = [
    { glycan_id: "A", config: "c", score_c: 1, score_i: 0.9, probability: null, peak_annotations: [], decision: true },
    { glycan_id: "B", config: "c", score_c: 1, score_i: 0.4, probability: null, peak_annotations: [], decision: null },
    { glycan_id: "C", config: "c", score_c: 1, score_i: null, probability: null, peak_annotations: [], decision: null },
  ];

  it("filters by minimum score_i", () => {
    const visible = visibleAnnotations(rows, { minScoreI: 0.5, onlyUndecided: false });
    expect(visible.map((r) => r.glycan_id)).toEqual(["A"]);
  });

  it("filters to undecided rows", () => {
    const visible = visibleAnnotations(rows, { minScoreI: null, onlyUndecided: true });
    expect(visible.map((r) => r.glycan_id)).toEqual(["B", "C"]);
  });

  it("no filter shows everything", () => {
    expect(visibleAnnotations(rows, { minScoreI: null, onlyUndecided: false })).toHaveLength(3);
  });
});
