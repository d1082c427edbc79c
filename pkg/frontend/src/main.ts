/**
 * DOM shell: wires the pure renderers to the live API. All analysis
 * results come from the server; this file only moves state and markup.
 */

import { ApiClient, ApiError } from "./client.js";
import { RunSequencer, runLatest } from "./controller.js";
import {
  renderDiff,
  renderGraphSummary,
  renderPathDetail,
  renderPathGraph,
  renderPathList,
} from "./render.js";
import {
  UiScenarioState,
  decodeFragment,
  encodeFragment,
  hasChanges,
  initialState,
  setMitigation,
  setToggle,
} from "./state.js";
import type { AnalyzeResponse, ScenarioInfo } from "./types.js";

const client = new ApiClient();
const sequencer = new RunSequencer();

let scenarios: ScenarioInfo[] = [];
let state: UiScenarioState = initialState("");
let lastPaths: AnalyzeResponse["paths"] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function currentScenario(): ScenarioInfo {
  const info = scenarios.find((s) => s.id === state.scenario);
  if (!info) throw new Error(`unknown scenario ${state.scenario}`);
  return info;
}

function toggleDefaults(info: ScenarioInfo): Map<string, boolean> {
  return new Map(info.threats.map((t) => [t.id, t.enabled]));
}

function showBanner(message: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message ?? "";
  banner.hidden = message === null;
}

function syncFragment(): void {
  history.replaceState(null, "", encodeFragment(state));
}

function renderControls(): void {
  const info = currentScenario();
  const select = el<HTMLSelectElement>("scenario");
  select.innerHTML = scenarios
    .map(
      (s) =>
        `<option value="${s.id}"${s.id === state.scenario ? " selected" : ""}>${s.id}</option>`,
    )
    .join("");

  el<HTMLDivElement>("threats").innerHTML = info.threats
    .map((t) => {
      const effective = state.toggles[t.id] ?? t.enabled;
      return (
        `<label class="toggle"><input type="checkbox" data-threat="${t.id}"` +
        `${effective ? " checked" : ""}/> <code>${t.id}</code>` +
        ` <span class="hint">${t.consequence} @ ${t.target_place}</span></label>`
      );
    })
    .join("");

  el<HTMLDivElement>("mitigations").innerHTML = info.mitigations
    .map(
      (name) =>
        `<label class="toggle"><input type="checkbox" data-mitigation="${name}"` +
        `${state.mitigations.includes(name) ? " checked" : ""}/> ${name}</label>`,
    )
    .join("");
}

function renderAnalysis(body: AnalyzeResponse): void {
  lastPaths = body.paths;
  state = { ...state, lastRunId: body.run_id };
  el<HTMLSpanElement>("run-id").textContent = body.run_id;
  el<HTMLDivElement>("summary").innerHTML = renderGraphSummary(body.graph);
  el<HTMLDivElement>("paths").innerHTML = renderPathList(body.paths);
  el<HTMLDivElement>("graph").innerHTML = renderPathGraph(body.paths);
  el<HTMLDivElement>("detail").innerHTML = "";
}

function selectPath(index: number): void {
  const path = lastPaths[index];
  if (!path) return;
  el<HTMLDivElement>("detail").innerHTML = renderPathDetail(path);
  for (const node of document.querySelectorAll<SVGElement>("[data-paths]")) {
    const indices = (node.dataset.paths ?? "").split(",").map(Number);
    node.classList.toggle("selected", indices.includes(index));
  }
  for (const row of document.querySelectorAll<HTMLElement>("[data-path]")) {
    row.classList.toggle("selected", Number(row.dataset.path) === index);
  }
}

async function runBaseline(): Promise<void> {
  showBanner(null);
  try {
    await runLatest(
      sequencer,
      () => client.analyze({ scenario: state.scenario }),
      (body) => {
        state = { ...state, baselineRunId: body.run_id };
        renderAnalysis(body);
        el<HTMLDivElement>("diff").innerHTML =
          '<p class="empty">Toggle a threat or mitigation to diff against this baseline.</p>';
      },
    );
  } catch (error) {
    reportError(error);
  }
}

async function runSpeculation(): Promise<void> {
  showBanner(null);
  if (!hasChanges(state)) {
    await runBaseline();
    return;
  }
  try {
    await runLatest(
      sequencer,
      () =>
        client.speculate({
          scenario: state.scenario,
          toggles: state.toggles,
          mitigations: state.mitigations,
        }),
      (body) => {
        renderAnalysis({ run_id: body.run_id, ...body.variant });
        el<HTMLDivElement>("diff").innerHTML = renderDiff(body.diff);
      },
    );
  } catch (error) {
    reportError(error);
  }
}

function reportError(error: unknown): void {
  if (error instanceof ApiError) {
    showBanner(`${error.status}: ${error.message}`);
  } else {
    showBanner(String(error));
  }
}

function wireEvents(): void {
  el<HTMLSelectElement>("scenario").addEventListener("change", (event) => {
    const id = (event.target as HTMLSelectElement).value;
    state = initialState(id);
    syncFragment();
    renderControls();
    void runBaseline();
  });

  el<HTMLButtonElement>("rerun-baseline").addEventListener("click", () => {
    void runBaseline();
  });

  document.addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    const info = currentScenario();
    try {
      if (input.dataset.threat) {
        state = setToggle(
          state,
          input.dataset.threat,
          input.checked,
          toggleDefaults(info),
        );
      } else if (input.dataset.mitigation) {
        state = setMitigation(
          state,
          input.dataset.mitigation,
          input.checked,
          new Set(info.mitigations),
        );
      } else {
        return;
      }
    } catch (error) {
      reportError(error);
      return;
    }
    syncFragment();
    void runSpeculation();
  });

  document.addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest<HTMLElement>("[data-path]");
    if (row) {
      selectPath(Number(row.dataset.path));
      return;
    }
    const node = (event.target as HTMLElement).closest<SVGElement>(".node");
    if (node && node instanceof SVGElement && node.dataset.paths) {
      selectPath(Number(node.dataset.paths.split(",")[0]));
    }
  });
}

async function boot(): Promise<void> {
  try {
    const listing = await client.getScenarios();
    scenarios = listing.scenarios;
    if (!scenarios.length) {
      showBanner("server has no scenarios loaded");
      return;
    }
    state = decodeFragment(location.hash, scenarios[0].id);
    if (!scenarios.some((s) => s.id === state.scenario)) {
      state = initialState(scenarios[0].id);
    }
    renderControls();
    wireEvents();
    if (hasChanges(state)) {
      await runSpeculation();
    } else {
      await runBaseline();
    }
  } catch (error) {
    reportError(error);
  }
}

void boot();
