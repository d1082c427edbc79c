/**
 * UI state: scenario selection, toggle overrides, chosen mitigations,
 * and the run ids of the last analysis and the pinned baseline.
 *
 * Everything the view shows is reconstructible from (scenario, toggles,
 * mitigations), so exactly that triple round-trips through the URL
 * fragment; run ids are server-side artifacts and stay out of the URL.
 */

export interface UiScenarioState {
  scenario: string;
  /** Overrides relative to the scenario's defaults; absent id = default. */
  toggles: Record<string, boolean>;
  mitigations: string[];
  lastRunId: string | null;
  baselineRunId: string | null;
}

export function initialState(scenario: string): UiScenarioState {
  return {
    scenario,
    toggles: {},
    mitigations: [],
    lastRunId: null,
    baselineRunId: null,
  };
}

export class UnknownIdError extends Error {
  constructor(kind: "threat" | "mitigation", id: string) {
    super(`unknown ${kind}: ${id}`);
    this.name = "UnknownIdError";
  }
}

/**
 * Sets the desired on/off state for one threat. An override equal to the
 * scenario default is dropped, so toggling and untoggling returns the
 * state to a clean (empty-diff) configuration.
 */
export function setToggle(
  state: UiScenarioState,
  id: string,
  desired: boolean,
  defaults: Map<string, boolean>,
): UiScenarioState {
  if (!defaults.has(id)) {
    throw new UnknownIdError("threat", id);
  }
  const toggles = { ...state.toggles };
  if (defaults.get(id) === desired) {
    delete toggles[id];
  } else {
    toggles[id] = desired;
  }
  return { ...state, toggles };
}

export function setMitigation(
  state: UiScenarioState,
  name: string,
  active: boolean,
  known: ReadonlySet<string>,
): UiScenarioState {
  if (!known.has(name)) {
    throw new UnknownIdError("mitigation", name);
  }
  const chosen = new Set(state.mitigations);
  if (active) {
    chosen.add(name);
  } else {
    chosen.delete(name);
  }
  return { ...state, mitigations: [...chosen].sort() };
}

export function hasChanges(state: UiScenarioState): boolean {
  return Object.keys(state.toggles).length > 0 || state.mitigations.length > 0;
}

/** `#s=equifax&t=CVE-A:off,CVE-B:on&m=network-segmentation` */
export function encodeFragment(state: UiScenarioState): string {
  const params = new URLSearchParams();
  params.set("s", state.scenario);
  const ids = Object.keys(state.toggles).sort();
  if (ids.length) {
    params.set(
      "t",
      ids.map((id) => `${id}:${state.toggles[id] ? "on" : "off"}`).join(","),
    );
  }
  if (state.mitigations.length) {
    params.set("m", [...state.mitigations].sort().join(","));
  }
  return "#" + params.toString();
}

export function decodeFragment(
  fragment: string,
  fallbackScenario: string,
): UiScenarioState {
  const params = new URLSearchParams(fragment.replace(/^#/, ""));
  const state = initialState(params.get("s") || fallbackScenario);
  const toggles = params.get("t");
  if (toggles) {
    for (const part of toggles.split(",")) {
      const sep = part.lastIndexOf(":");
      if (sep <= 0) continue;
      const word = part.slice(sep + 1);
      if (word !== "on" && word !== "off") continue;
      state.toggles[part.slice(0, sep)] = word === "on";
    }
  }
  const mitigations = params.get("m");
  if (mitigations) {
    state.mitigations = mitigations.split(",").filter(Boolean).sort();
  }
  return state;
}
