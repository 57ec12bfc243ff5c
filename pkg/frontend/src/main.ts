/** Bootstrap: wires state and render functions into the page. */

import { ApiClient } from "./api.js";
import { SessionState, annotationKey } from "./state.js";
import { renderError, renderScanDetail, renderScanList } from "./views.js";

export function mount(root: HTMLElement, baseUrl = ""): SessionState {
  const api = new ApiClient(baseUrl);
  const state = new SessionState(api, "ui");

  root.innerHTML = `
    <header>
      <h1>glyms review</h1>
      <div class="controls">
        <label>score_i ≥ <input id="min-score" type="number" step="0.05" min="0" max="1"/></label>
        <label><input id="undecided" type="checkbox"/> undecided only</label>
        <button id="train">train model</button>
      </div>
      <div id="error"></div>
    </header>
    <main><aside id="scan-list"></aside><section id="scan-detail"></section></main>`;

  const scanList = root.querySelector<HTMLElement>("#scan-list")!;
  const scanDetail = root.querySelector<HTMLElement>("#scan-detail")!;
  const errorBox = root.querySelector<HTMLElement>("#error")!;

  state.subscribe(() => {
    scanList.innerHTML = renderScanList(state.scans, state.currentScan?.scan_id ?? null);
    scanDetail.innerHTML = state.currentScan
      ? renderScanDetail(state.currentScan, state.filter)
      : "<p>select a scan</p>";
    errorBox.innerHTML = renderError(state.lastError);
  });

  scanList.addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest<HTMLElement>(".scan-row");
    if (row?.dataset.scan) void state.openScan(Number(row.dataset.scan));
  });

  scanDetail.addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>("button");
    if (!button?.dataset.key || !state.currentScan) return;
    const annotation = state.currentScan.annotations.find(
      (a) => annotationKey(a) === button.dataset.key,
    );
    if (annotation) void state.decide(annotation, button.classList.contains("approve"));
  });

  root.querySelector<HTMLInputElement>("#min-score")!.addEventListener("change", (event) => {
    const value = (event.target as HTMLInputElement).value;
    state.setFilter({ minScoreI: value === "" ? null : Number(value) });
  });
  root.querySelector<HTMLInputElement>("#undecided")!.addEventListener("change", (event) => {
    state.setFilter({ onlyUndecided: (event.target as HTMLInputElement).checked });
  });
  root.querySelector<HTMLButtonElement>("#train")!.addEventListener("click", () => {
    void state.train();
  });

  void state.loadScans();
  return state;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app")!);
}
