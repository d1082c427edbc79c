/**
 * Deterministic layered left-to-right layout for attack-path graphs.
 *
 * Column = position of the threat within its chain; nodes are merged per
 * (column, threat) pair; rows are sorted by threat id. Identical inputs
 * always produce identical coordinates, so a rendered run is stable and
 * comparable across reloads.
 */

import type { AttackPathJson } from "./types.js";

export const COLUMN_GAP = 190;
export const ROW_GAP = 58;
export const MARGIN_X = 90;
export const MARGIN_Y = 40;

export interface LayoutNode {
  id: string;
  label: string;
  column: number;
  row: number;
  x: number;
  y: number;
  /** Indices into the input path list that pass through this node. */
  paths: number[];
}

export interface LayoutEdge {
  id: string;
  from: string;
  to: string;
  paths: number[];
}

export interface PathGraphLayout {
  nodes: LayoutNode[];
  edges: LayoutEdge[];
  width: number;
  height: number;
}

function nodeId(column: number, label: string): string {
  return `${column}:${label}`;
}

export function layeredLayout(paths: AttackPathJson[]): PathGraphLayout {
  const nodePaths = new Map<string, number[]>();
  const edgePaths = new Map<string, number[]>();
  let columns = 0;

  paths.forEach((path, index) => {
    path.labels.forEach((label, column) => {
      columns = Math.max(columns, column + 1);
      const id = nodeId(column, label);
      const bucket = nodePaths.get(id) ?? [];
      bucket.push(index);
      nodePaths.set(id, bucket);
      if (column > 0) {
        const key = `${nodeId(column - 1, path.labels[column - 1])}>${id}`;
        const edges = edgePaths.get(key) ?? [];
        edges.push(index);
        edgePaths.set(key, edges);
      }
    });
  });

  const perColumn: string[][] = Array.from({ length: columns }, () => []);
  for (const id of nodePaths.keys()) {
    const column = Number(id.slice(0, id.indexOf(":")));
    perColumn[column].push(id);
  }

  const nodes: LayoutNode[] = [];
  let rows = 0;
  perColumn.forEach((ids, column) => {
    ids.sort();
    rows = Math.max(rows, ids.length);
    ids.forEach((id, row) => {
      nodes.push({
        id,
        label: id.slice(id.indexOf(":") + 1),
        column,
        row,
        x: MARGIN_X + column * COLUMN_GAP,
        y: MARGIN_Y + row * ROW_GAP,
        paths: nodePaths.get(id)!,
      });
    });
  });

  const edges: LayoutEdge[] = [...edgePaths.keys()].sort().map((key) => {
    const [from, to] = key.split(">");
    return { id: key, from, to, paths: edgePaths.get(key)! };
  });

  return {
    nodes,
    edges,
    width: MARGIN_X * 2 + Math.max(columns - 1, 0) * COLUMN_GAP,
    height: MARGIN_Y * 2 + Math.max(rows - 1, 0) * ROW_GAP,
  };
}
