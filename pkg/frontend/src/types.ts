/**
 * Response shapes of the threatflow HTTP API.
 * Mirrors the server's JSON exactly; the UI adds nothing and computes no
 * analysis of its own.
 */

export type CiaLevel = "none" | "partial" | "full";

export interface ThreatEntry {
  id: string;
  enabled: boolean;
  service: string;
  target_place: string;
  issue: string;
  consequence: string;
  requires: string[];
  cia_impact: Record<string, CiaLevel>;
}

export interface RequirementJson {
  axis: string;
  priority: number;
}

export interface BoundsJson {
  max_depth: number;
  max_nodes: number;
  max_tokens_per_place: number;
}

export interface ScenarioInfo {
  id: string;
  threats: ThreatEntry[];
  mitigations: string[];
  active_mitigations: string[];
  requirements: RequirementJson[];
  bounds: BoundsJson;
}

export interface ScenarioListing {
  scenarios: ScenarioInfo[];
}

export interface PathStep {
  threat: string;
  service: string;
  place: string;
  consequence: string;
}

export interface ViolatedRequirement extends RequirementJson {
  partial: boolean;
}

export interface AttackPathJson {
  labels: string[];
  entry_point: string;
  priority: number;
  loop: boolean;
  steps: PathStep[];
  violated: ViolatedRequirement[];
  witness: [string, string][];
}

export interface GraphSummary {
  nodes: number;
  edges: number;
  dead: number;
  truncated: boolean;
  truncation_reasons: string[];
}

export interface AnalyzeResponse {
  run_id: string;
  scenario: string;
  paths: AttackPathJson[];
  centrality: Record<string, { count: number; rank: number }>;
  violations: ViolatedRequirement[];
  graph: GraphSummary;
}

export interface DiffJson {
  removed: AttackPathJson[];
  surviving: AttackPathJson[];
  newly_exposed: AttackPathJson[];
}

export interface SpeculateResponse {
  run_id: string;
  baseline: Omit<AnalyzeResponse, "run_id">;
  variant: Omit<AnalyzeResponse, "run_id">;
  diff: DiffJson;
}

export interface ThreatListing {
  threats: ThreatEntry[];
  drafts: unknown[];
  links: string[];
  mitigations: string[];
}
