import { describe, expect, it } from "vitest";

import {
  extractRenderedChains,
  renderDiff,
  renderGraphSummary,
  renderPathDetail,
  renderPathGraph,
  renderPathList,
} from "../src/render.js";
import type { AnalyzeResponse, SpeculateResponse } from "../src/types.js";
import { fixture } from "./helpers.js";

const table4 = fixture<AnalyzeResponse>("table4-analyze");
const equifax = fixture<AnalyzeResponse>("equifax-analyze");
const speculation = fixture<SpeculateResponse>("equifax-speculate-segmentation");

describe("path list", () => {
  it("renders exactly the chains the server returned, in order", () => {
    const html = renderPathList(table4.paths);
    const rows = html.match(/data-path="\d+"/g) ?? [];
    expect(rows.length).toBe(table4.paths.length);
    expect(extractRenderedChains(table4.paths)).toEqual(
      table4.paths.map((p) => p.labels),
    );
    table4.paths.forEach((path) => {
      expect(html).toContain(path.labels.join(" &rarr; "));
    });
  });

  it("carries entry point and priority per row", () => {
    const html = renderPathList(equifax.paths);
    expect(html).toContain("entry NET, priority 1");
    expect(html).toContain("entry VM, priority 1");
  });

  it("states the empty case explicitly", () => {
    expect(renderPathList([])).toContain("No attack paths");
  });
});

describe("path detail", () => {
  it("reveals the chain and the violated requirements", () => {
    const chain = equifax.paths.find((p) => p.labels.length === 3)!;
    const html = renderPathDetail(chain);
    expect(html).toContain("CVE-2017-5638");
    expect(html).toContain("WEAK-FLAT-NETWORK");
    expect(html).toContain("confidentiality (priority 1)");
  });

  it("marks partial violations", () => {
    const partial = equifax.paths.find((p) =>
      p.violated.some((v) => v.partial),
    )!;
    expect(renderPathDetail(partial)).toContain("partial");
  });
});

describe("path graph", () => {
  it("draws threat nodes visually distinct and path-addressable", () => {
    const svg = renderPathGraph(equifax.paths);
    expect(svg).toContain('class="node threat"');
    expect(svg).toContain("data-paths=");
    for (const path of equifax.paths) {
      for (const label of path.labels) {
        expect(svg).toContain(`>${label}</text>`);
      }
    }
  });

  it("renders the explicit empty state", () => {
    expect(renderPathGraph([])).toContain("No attack paths to draw");
  });
});

describe("diff view", () => {
  it("strikes removed paths and highlights newly exposed ones", () => {
    const html = renderDiff(speculation.diff);
    expect(html).toContain(
      '<li class="removed">CVE-2017-5638 -&gt; WEAK-PLAINTEXT-CREDS -&gt; WEAK-FLAT-NETWORK</li>',
    );
    expect(html).toContain('<li class="surviving">CVE-2016-5362</li>');
    expect(html).toContain('<li class="surviving">CVE-2016-5363</li>');
    expect(html).not.toContain('class="exposed"');
  });

  it("collapses a no-change diff to an explicit note", () => {
    const html = renderDiff({
      removed: [],
      surviving: speculation.diff.surviving,
      newly_exposed: [],
    });
    expect(html).toContain("No change");
  });

  it("handles both sides empty", () => {
    expect(
      renderDiff({ removed: [], surviving: [], newly_exposed: [] }),
    ).toContain("No attack paths on either side");
  });
});

describe("graph summary", () => {
  it("reports sizes and flags truncation", () => {
    expect(renderGraphSummary(table4.graph)).toContain("markings");
    const truncated = renderGraphSummary({
      ...table4.graph,
      truncated: true,
      truncation_reasons: ["node budget exhausted"],
    });
    expect(truncated).toContain("node budget exhausted");
  });
});
