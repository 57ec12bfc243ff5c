/** Session state for the review workflow.
 *
 * Decisions update optimistically: the row flips immediately, the POST goes
 * out, and a server rejection rolls the row back and surfaces the error.
 * After any acknowledged write the decision state mirrors the server.
 */

import { AnnotationView, ApiClient, ScanDetail, ScanSummary } from "./api.js";

export interface AnnotationFilter {
  minScoreI: number | null;
  onlyUndecided: boolean;
}

export const annotationKey = (a: { glycan_id: string; config: string }): string =>
  `${a.glycan_id} ${a.config}`;

export function visibleAnnotations(
  annotations: AnnotationView[],
  filter: AnnotationFilter,
): AnnotationView[] {
  return annotations.filter((a) => {
    if (filter.minScoreI !== null && (a.score_i ?? 0) < filter.minScoreI) return false;
    if (filter.onlyUndecided && a.decision !== null) return false;
    return true;
  });
}

export type Listener = () => void;

export class SessionState {
  scans: ScanSummary[] = [];
  currentScan: ScanDetail | null = null;
  filter: AnnotationFilter = { minScoreI: null, onlyUndecided: false };
  lastError: string | null = null;
  busy = false;

  private listeners: Listener[] = [];

  constructor(
    private readonly api: ApiClient,
    readonly reviewer: string = "-",
  ) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  async loadScans(): Promise<void> {
    this.scans = await this.api.listScans();
    this.notify();
  }

  async openScan(scanId: number, page = 0): Promise<void> {
    this.currentScan = await this.api.getScan(scanId, page);
    this.lastError = null;
    this.notify();
  }

  async reload(): Promise<void> {
    await this.loadScans();
    if (this.currentScan) await this.openScan(this.currentScan.scan_id, this.currentScan.page);
  }

  /** Optimistic decision toggle; rolls back if the server rejects it. */
  async decide(annotation: AnnotationView, approved: boolean): Promise<boolean> {
    const scan = this.currentScan;
    if (!scan) throw new Error("no scan open");
    const row = scan.annotations.find(
      (a) => annotationKey(a) === annotationKey(annotation),
    );
    if (!row) throw new Error("annotation not in the open scan");
    const previous = row.decision;
    row.decision = approved;
    this.lastError = null;
    this.notify();
    try {
      await this.api.postDecision({
        scan_id: scan.scan_id,
        glycan_id: row.glycan_id,
        config: row.config,
        approved,
        reviewer: this.reviewer,
      });
      return true;
    } catch (err) {
      row.decision = previous;
      this.lastError = err instanceof Error ? err.message : String(err);
      this.notify();
      return false;
    }
  }

  async train(): Promise<{ trained_records: number }> {
    this.busy = true;
    this.notify();
    try {
      const result = await this.api.train();
      // probabilities may have changed; re-read the open scan
      await this.reload();
      return result;
    } finally {
      this.busy = false;
      this.notify();
    }
  }

  setFilter(filter: Partial<AnnotationFilter>): void {
    this.filter = { ...this.filter, ...filter };
    this.notify();
  }

  /** Decision state per visible annotation row, for display and assertions. */
  decisionState(): Map<string, boolean | null> {
    const out = new Map<string, boolean | null>();
    for (const a of this.currentScan?.annotations ?? []) {
      out.set(annotationKey(a), a.decision);
    }
    return out;
  }
}
