import { describe, expect, it } from "vitest";

import {
  COLUMN_GAP,
  MARGIN_X,
  MARGIN_Y,
  ROW_GAP,
  layeredLayout,
} from "../src/layout.js";
import type { AnalyzeResponse } from "../src/types.js";
import { fixture } from "./helpers.js";

const equifax = fixture<AnalyzeResponse>("equifax-analyze");

describe("layered layout", () => {
  it("merges shared chain prefixes into one node per column", () => {
    const layout = layeredLayout(equifax.paths);
    const entry = layout.nodes.find((n) => n.id === "0:CVE-2017-5638");
    expect(entry).toBeDefined();
    // three equifax chains start at the same exploit
    expect(entry!.paths.length).toBe(3);
    const ids = layout.nodes.map((n) => n.id);
    expect(new Set(ids).size).toBe(ids.length);
  });

  it("lays columns left to right and rows sorted by id", () => {
    const layout = layeredLayout(equifax.paths);
    for (const node of layout.nodes) {
      expect(node.x).toBe(MARGIN_X + node.column * COLUMN_GAP);
      expect(node.y).toBe(MARGIN_Y + node.row * ROW_GAP);
    }
    const firstColumn = layout.nodes
      .filter((n) => n.column === 0)
      .map((n) => n.label);
    expect(firstColumn).toEqual([...firstColumn].sort());
  });

  it("keeps every chain walkable through the edge set", () => {
    const layout = layeredLayout(equifax.paths);
    const edges = new Set(layout.edges.map((e) => `${e.from}>${e.to}`));
    equifax.paths.forEach((path) => {
      for (let i = 1; i < path.labels.length; i += 1) {
        const key = `${i - 1}:${path.labels[i - 1]}>${i}:${path.labels[i]}`;
        expect(edges.has(key)).toBe(true);
      }
    });
  });

  it("is deterministic for identical input", () => {
    const a = layeredLayout(equifax.paths);
    const b = layeredLayout(equifax.paths);
    expect(b).toEqual(a);
  });

  it("handles the empty path set", () => {
    const layout = layeredLayout([]);
    expect(layout.nodes).toEqual([]);
    expect(layout.edges).toEqual([]);
  });
});
