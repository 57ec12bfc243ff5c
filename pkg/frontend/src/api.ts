/** Typed client for the curation service HTTP API.
 *
 * All numbers shown in the UI come from these responses; nothing is
 * recomputed client-side.
 */

export interface ScanSummary {
  scan_id: number;
  ms_level: number;
  precursor_mz: number | null;
  precursor_charge: number | null;
  parent_scan_id: number | null;
  peak_count: number;
  annotation_count: number;
}

export interface PeakView {
  mz: number;
  intensity: number;
  relative: number;
}

export interface PeakAnnotationView {
  peak_index: number;
  fragment: string;
  theoretical_mz: number;
  delta: number;
}

export interface AnnotationView {
  glycan_id: string;
  config: string;
  score_c: number | null;
  score_i: number | null;
  probability: number | null;
  peak_annotations: PeakAnnotationView[];
  decision: boolean | null;
}

export interface ScanDetail {
  scan_id: number;
  ms_level: number;
  precursor_mz: number | null;
  peak_count: number;
  page: number;
  page_size: number;
  peaks: PeakView[];
  annotations: AnnotationView[];
}

export interface SelectionView {
  scan_id: number;
  glycan_id: string;
  config: string;
  approved: boolean;
  reviewer: string;
  timestamp: string;
}

export interface ModelStats {
  trained: boolean;
  nodes: number;
  edges: number;
  levels: number;
}

export interface TrainResult {
  trained_records: number;
  nodes: number;
  edges: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request<T>(path: string, init?: Parameters<FetchLike>[1]): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async listScans(): Promise<ScanSummary[]> {
    const body = await this.request<{ scans: ScanSummary[] }>("/scans");
    return body.scans;
  }

  getScan(scanId: number, page = 0): Promise<ScanDetail> {
    return this.request<ScanDetail>(`/scans/${scanId}?page=${page}`);
  }

  async listSelections(): Promise<SelectionView[]> {
    const body = await this.request<{ selections: SelectionView[] }>("/selections");
    return body.selections;
  }

  postDecision(decision: {
    scan_id: number;
    glycan_id: string;
    config: string;
    approved: boolean;
    reviewer?: string;
  }): Promise<{ ok: boolean; timestamp: string }> {
    return this.request("/decisions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(decision),
    });
  }

  train(): Promise<TrainResult> {
    return this.request("/train", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: "{}",
    });
  }

  modelStats(): Promise<ModelStats> {
    return this.request<ModelStats>("/model/stats");
  }

  filter(policy: { top_k?: number; min_probability?: number; tolerance?: number }): Promise<{
    kept: number;
    total: number;
    out: string;
  }> {
    return this.request("/filter", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(policy),
    });
  }
}
