/** Stick-plot rendering of a peak list as an SVG string.
 *
 * Pure string generation so it is testable without a DOM; annotated peaks
 * are colored and carry a tooltip with their fragment assignments.
 */

import { PeakAnnotationView, PeakView } from "./api.js";

export interface PlotOptions {
  width: number;
  height: number;
  padding: number;
}

export const DEFAULT_PLOT: PlotOptions = { width: 800, height: 240, padding: 30 };

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

export function mzRange(peaks: PeakView[]): [number, number] {
  if (peaks.length === 0) return [0, 1];
  let lo = peaks[0].mz;
  let hi = peaks[0].mz;
  for (const p of peaks) {
    if (p.mz < lo) lo = p.mz;
    if (p.mz > hi) hi = p.mz;
  }
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

export function annotatedIndices(annotations: PeakAnnotationView[][]): Map<number, string[]> {
  const out = new Map<number, string[]>();
  for (const group of annotations) {
    for (const a of group) {
      const labels = out.get(a.peak_index) ?? [];
      labels.push(a.fragment);
      out.set(a.peak_index, labels);
    }
  }
  return out;
}

export function renderStickPlot(
  peaks: PeakView[],
  annotations: PeakAnnotationView[][],
  options: PlotOptions = DEFAULT_PLOT,
): string {
  const { width, height, padding } = options;
  const [lo, hi] = mzRange(peaks);
  const span = hi - lo;
  const x = (mz: number): number =>
    padding + ((mz - lo) / span) * (width - 2 * padding);
  const y = (relative: number): number =>
    height - padding - relative * (height - 2 * padding);
  const annotated = annotatedIndices(annotations);

  const sticks = peaks
    .map((p, i) => {
      const labels = annotated.get(i);
      const cls = labels ? "peak annotated" : "peak";
      const title = labels ? `<title>${esc(`${p.mz} ${labels.join(", ")}`)}</title>` : "";
      return (
        `<line class="${cls}" x1="${x(p.mz).toFixed(1)}" y1="${y(0).toFixed(1)}" ` +
        `x2="${x(p.mz).toFixed(1)}" y2="${y(p.relative).toFixed(1)}">${title}</line>`
      );
    })
    .join("");

  const axis =
    `<line class="axis" x1="${padding}" y1="${y(0)}" x2="${width - padding}" y2="${y(0)}"/>` +
    `<text class="tick" x="${padding}" y="${height - 8}">${lo.toFixed(1)}</text>` +
    `<text class="tick" x="${width - padding}" y="${height - 8}" text-anchor="end">${hi.toFixed(1)}</text>`;

  return (
    `<svg viewBox="0 0 ${width} ${height}" class="stickplot" role="img">` +
    axis +
    sticks +
    `</svg>`
  );
}
