/** HTML render functions (pure string -> string, DOM-free). */

import { AnnotationView, ScanDetail, ScanSummary } from "./api.js";
import { renderStickPlot } from "./plot.js";
import { AnnotationFilter, annotationKey, visibleAnnotations } from "./state.js";

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

export const fmtScore = (value: number | null): string =>
  value === null ? "–" : value.toFixed(4);

export const fmtProbability = (value: number | null): string =>
  value === null ? "–" : value.toExponential(4);

export function renderScanList(scans: ScanSummary[], currentId: number | null): string {
  const rows = scans
    .map((s) => {
      const current = s.scan_id === currentId ? " current" : "";
      const precursor =
        s.precursor_mz === null
          ? "—"
          : `${s.precursor_mz.toFixed(4)} (${s.precursor_charge ?? "?"}+)`;
      return (
        `<tr class="scan-row${current}" data-scan="${s.scan_id}">` +
        `<td>${s.scan_id}</td><td>MS${s.ms_level}</td><td>${precursor}</td>` +
        `<td>${s.peak_count}</td><td>${s.annotation_count}</td></tr>`
      );
    })
    .join("");
  return (
    `<table class="scans"><thead><tr>` +
    `<th>scan</th><th>level</th><th>precursor</th><th>peaks</th><th>annotations</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function decisionBadge(decision: boolean | null): string {
  if (decision === null) return `<span class="badge undecided">undecided</span>`;
  return decision
    ? `<span class="badge approved">approved</span>`
    : `<span class="badge rejected">rejected</span>`;
}

export function renderAnnotationRows(
  annotations: AnnotationView[],
  filter: AnnotationFilter,
): string {
  const rows = visibleAnnotations(annotations, filter)
    .map((a) => {
      const key = esc(annotationKey(a));
      return (
        `<tr class="annotation" data-key="${key}">` +
        `<td class="glycan">${esc(a.glycan_id)}</td>` +
        `<td class="config">${esc(a.config)}</td>` +
        `<td class="score-c">${fmtScore(a.score_c)}</td>` +
        `<td class="score-i">${fmtScore(a.score_i)}</td>` +
        `<td class="probability">${fmtProbability(a.probability)}</td>` +
        `<td>${decisionBadge(a.decision)}</td>` +
        `<td><button class="approve" data-key="${key}">approve</button>` +
        `<button class="reject" data-key="${key}">reject</button></td></tr>`
      );
    })
    .join("");
  return (
    `<table class="annotations"><thead><tr>` +
    `<th>glycan</th><th>ion config</th><th>score_c</th><th>score_i</th>` +
    `<th>probability</th><th>decision</th><th></th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderScanDetail(scan: ScanDetail, filter: AnnotationFilter): string {
  const plot = renderStickPlot(
    scan.peaks,
    scan.annotations.map((a) => a.peak_annotations),
  );
  const header =
    `<h2>Scan ${scan.scan_id} (MS${scan.ms_level})` +
    (scan.precursor_mz === null ? "" : ` — precursor ${scan.precursor_mz.toFixed(4)}`) +
    `</h2>`;
  return header + plot + renderAnnotationRows(scan.annotations, filter);
}

export function renderError(message: string | null): string {
  return message === null ? "" : `<div class="error">${esc(message)}</div>`;
}
