import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { makeFakeService } from "./fake_service.js";

describe("ApiClient", () => {
  it("lists scans", async () => {
    const service = makeFakeService();
    const api = new ApiClient("", service.fetch);
    const scans = await api.listScans();
    expect(scans.map((s) => s.scan_id)).toEqual([1, 2]);
    expect(scans[1].annotation_count).toBe(2);
  });

  it("fetches scan detail with peaks and annotations", async () => {
    const service = makeFakeService();
    const api = new ApiClient("", service.fetch);
    const detail = await api.getScan(2);
    expect(detail.peaks).toHaveLength(3);
    expect(detail.annotations.map((a) => a.glycan_id)).toEqual(["G1", "G2"]);
    expect(detail.annotations[0].decision).toBeNull();
  });

  it("raises ApiError with the server detail on 404", async () => {
    const service = makeFakeService();
    const api = new ApiClient("", service.fetch);
    await expect(api.getScan(999)).rejects.toThrowError(ApiError);
    await expect(api.getScan(999)).rejects.toThrowError(/unknown scan 999/);
  });

  it("posts decisions and reads them back from /selections", async () => {
    const service = makeFakeService();
    const api = new ApiClient("", service.fetch);
    await api.postDecision({ scan_id: 2, glycan_id: "G1", config: "1H+", approved: true });
    const selections = await api.listSelections();
    expect(selections).toHaveLength(1);
    expect(selections[0]).toMatchObject({ scan_id: 2, glycan_id: "G1", approved: true });
  });

  it("triggers training and sees model stats change", async () => {
    const service = makeFakeService();
    const api = new ApiClient("", service.fetch);
    expect((await api.modelStats()).trained).toBe(false);
    const result = await api.train();
    expect(result.nodes).toBeGreaterThan(0);
    expect((await api.modelStats()).trained).toBe(true);
  });
});
