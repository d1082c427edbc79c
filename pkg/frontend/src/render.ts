/**
 * Pure HTML/SVG renderers. Every function maps API data to markup strings;
 * the DOM shell in main.ts only injects them and wires events. Keeping
 * rendering pure makes path-set parity testable without a browser.
 */

import { layeredLayout } from "./layout.js";
import type {
  AttackPathJson,
  DiffJson,
  GraphSummary,
  ViolatedRequirement,
} from "./types.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function pathKey(path: AttackPathJson): string {
  return path.labels.join(" -> ");
}

function violationText(violated: ViolatedRequirement[]): string {
  if (!violated.length) return "no requirement violated";
  return violated
    .map((v) => `${v.axis} (priority ${v.priority}${v.partial ? ", partial" : ""})`)
    .join(", ");
}

/** One list row per path; `data-path` carries the index for click wiring. */
export function renderPathList(paths: AttackPathJson[]): string {
  if (!paths.length) {
    return '<p class="empty">No attack paths: every requirement holds within the explored bounds.</p>';
  }
  const rows = paths.map((path, index) => {
    const chain = path.labels.map((l) => escapeHtml(l)).join(" &rarr; ");
    const loop = path.loop ? ' <span class="loop">loop</span>' : "";
    return (
      `<li class="path" data-path="${index}">` +
      `<span class="chain">${chain}</span>` +
      `<span class="meta">entry ${escapeHtml(path.entry_point)}, priority ${path.priority}</span>` +
      loop +
      `</li>`
    );
  });
  return `<ol class="path-list">${rows.join("")}</ol>`;
}

/** Detail card for one selected path: CVE chain plus violated requirements. */
export function renderPathDetail(path: AttackPathJson): string {
  const steps = path.steps
    .map(
      (s) =>
        `<li><code>${escapeHtml(s.threat)}</code> on ${escapeHtml(s.service)} ` +
        `(place ${escapeHtml(s.place)}) &rarr; ${escapeHtml(s.consequence)}</li>`,
    )
    .join("");
  return (
    `<h3>${escapeHtml(pathKey(path))}</h3>` +
    `<ul class="steps">${steps}</ul>` +
    `<p class="violations">Violates: ${escapeHtml(violationText(path.violated))}</p>`
  );
}

/**
 * Layered SVG of the path set. Threat nodes are visually distinct
 * (class "threat"); `data-paths` lists the path indices through each
 * element so selection can highlight a whole chain.
 */
export function renderPathGraph(paths: AttackPathJson[]): string {
  if (!paths.length) {
    return '<p class="empty">No attack paths to draw.</p>';
  }
  const layout = layeredLayout(paths);
  const parts: string[] = [];
  for (const edge of layout.edges) {
    const from = layout.nodes.find((n) => n.id === edge.from)!;
    const to = layout.nodes.find((n) => n.id === edge.to)!;
    parts.push(
      `<line class="edge" data-paths="${edge.paths.join(",")}" ` +
        `x1="${from.x + 70}" y1="${from.y}" x2="${to.x - 70}" y2="${to.y}"/>`,
    );
  }
  for (const node of layout.nodes) {
    parts.push(
      `<g class="node threat" data-paths="${node.paths.join(",")}" ` +
        `transform="translate(${node.x},${node.y})">` +
        `<rect x="-70" y="-16" width="140" height="32" rx="6"/>` +
        `<text text-anchor="middle" dy="4">${escapeHtml(node.label)}</text>` +
        `</g>`,
    );
  }
  return (
    `<svg class="path-graph" viewBox="0 0 ${layout.width} ${layout.height}" ` +
    `width="${layout.width}" height="${layout.height}">${parts.join("")}</svg>`
  );
}

/** Removed paths struck out, newly exposed highlighted, surviving plain. */
export function renderDiff(diff: DiffJson): string {
  const total =
    diff.removed.length + diff.surviving.length + diff.newly_exposed.length;
  if (!diff.removed.length && !diff.newly_exposed.length) {
    const note = total
      ? "No change: every baseline path survives."
      : "No attack paths on either side.";
    return `<p class="empty">${note}</p>`;
  }
  const row = (path: AttackPathJson, cls: string): string =>
    `<li class="${cls}">${escapeHtml(pathKey(path))}</li>`;
  return (
    '<ul class="diff-list">' +
    diff.removed.map((p) => row(p, "removed")).join("") +
    diff.newly_exposed.map((p) => row(p, "exposed")).join("") +
    diff.surviving.map((p) => row(p, "surviving")).join("") +
    "</ul>"
  );
}

export function renderGraphSummary(graph: GraphSummary): string {
  const truncated = graph.truncated
    ? ` <span class="warn">truncated: ${escapeHtml(graph.truncation_reasons.join("; "))}</span>`
    : "";
  return (
    `<span>${graph.nodes} markings, ${graph.edges} firings, ` +
    `${graph.dead} terminal</span>${truncated}`
  );
}

/** Labels rendered into a list/graph, for parity checks against the API. */
export function extractRenderedChains(paths: AttackPathJson[]): string[][] {
  return paths.map((path) => [...path.labels]);
}
