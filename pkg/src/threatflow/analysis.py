"""State-space exploration, attack-path enumeration, scenarios, and what-ifs.

``explore`` builds a reachability graph by breadth-first search with
canonical-marking dedup and configurable budgets. On nets with attached
threats it applies a partial-order reduction: transitions are statically
clustered by shared places (ignoring append-only places such as the shared
capability pool), and when every enabled firing of some cluster is invisible
the search expands just that cluster, serializing independent interleavings.
Link transitions (the visible ones) always branch fully, so the relative
order of threat effects is preserved.

``enumerate_attack_paths`` reports each violating chain once: an endpoint is
a fired link whose consequence violates a requirement, the chain is the
causal closure of its required capabilities, and every chain is validated by
finding a witness path in the graph (so each reported path replays on the
net). ``speculate`` re-runs a scenario under toggles/mitigations and diffs
the chains.
"""

from __future__ import annotations

import json
import os
from collections import Counter, deque
from dataclasses import dataclass, field as dc_field, fields as dc_fields, replace
from itertools import product
from typing import Any, Iterable, Mapping, Sequence

from .cloud import CloudConfig, Credentials, VmRequest, build_cloud_net, inject_request, load_cloud_config
from .hlpn.engine import Firing, all_enabled, fire, next_active_clock
from .hlpn.exprs import Expr, MinOf, member_places
from .hlpn.net import Marking, Net, flatten
from .threats import (
    Consequence,
    SecurityRequirement,
    ThreatCatalog,
    ThreatDefinition,
    attach,
    link_transition_id,
    load_catalog,
    resolve_mitigations,
    violated_requirements,
)


class AnalysisError(Exception):
    """Raised when exploration, replay, or path enumeration cannot proceed."""


class InvalidScenario(Exception):
    """Raised when a scenario file is malformed or references unknown entries."""


class UnknownToggle(Exception):
    """Raised when a what-if toggle names a threat absent from the catalog."""


@dataclass(frozen=True)
class ExploreBounds:
    """Budgets for exploration; any budget hit marks the graph truncated."""

    max_depth: int = 200
    max_nodes: int = 50000
    max_tokens_per_place: int = 64

    def __post_init__(self) -> None:
        for name in ("max_depth", "max_nodes", "max_tokens_per_place"):
            if getattr(self, name) < 1:
                raise AnalysisError(f"bound {name} must be positive")

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ExploreBounds":
        unknown = set(data) - {"max_depth", "max_nodes", "max_tokens_per_place"}
        if unknown:
            raise InvalidScenario(f"unknown bounds keys: {sorted(unknown)}")
        defaults = cls()
        return cls(
            data.get("max_depth", defaults.max_depth),
            data.get("max_nodes", defaults.max_nodes),
            data.get("max_tokens_per_place", defaults.max_tokens_per_place),
        )

    def to_json(self) -> dict[str, int]:
        return {
            "max_depth": self.max_depth,
            "max_nodes": self.max_nodes,
            "max_tokens_per_place": self.max_tokens_per_place,
        }


@dataclass
class GraphNode:
    key: str
    clock: int
    depth: int
    dead: bool


@dataclass(frozen=True)
class GraphEdge:
    src: int
    dst: int
    transition_id: str
    binding: str


@dataclass
class ReachabilityGraph:
    """Reachable state space; node identity is the clock-relative marking."""

    nodes: list[GraphNode]
    edges: list[GraphEdge]
    root: int
    truncated: bool
    truncation_reasons: tuple[str, ...]
    _markings: list = dc_field(default_factory=list, repr=False)
    _parent_edge: list = dc_field(default_factory=list, repr=False)
    _adjacency: dict | None = dc_field(default=None, repr=False)
    _cyclic: set | None = dc_field(default=None, repr=False)

    def dead_nodes(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.dead]

    def out_edges(self) -> dict[int, list[GraphEdge]]:
        if self._adjacency is None:
            adjacency: dict[int, list[GraphEdge]] = {}
            for edge in self.edges:
                adjacency.setdefault(edge.src, []).append(edge)
            self._adjacency = adjacency
        return self._adjacency

    def node_marking(self, idx: int) -> tuple[Marking, int]:
        return self._markings[idx]

    def witness_to(self, idx: int) -> list[GraphEdge]:
        """The breadth-first tree path from the root to a node."""
        steps: list[GraphEdge] = []
        while idx != self.root:
            edge_index = self._parent_edge[idx]
            if edge_index is None:
                raise AnalysisError(f"node {idx} has no recorded parent")
            edge = self.edges[edge_index]
            steps.append(edge)
            idx = edge.src
        steps.reverse()
        return steps

    def cyclic_nodes(self) -> set[int]:
        """Nodes inside a cycle (non-trivial strongly connected component)."""
        if self._cyclic is not None:
            return self._cyclic
        adjacency = self.out_edges()
        index_of: dict[int, int] = {}
        low: dict[int, int] = {}
        on_stack: set[int] = set()
        stack: list[int] = []
        cyclic: set[int] = set()
        counter = [0]

        for start in range(len(self.nodes)):
            if start in index_of:
                continue
            work = [(start, iter(adjacency.get(start, ())))]
            index_of[start] = low[start] = counter[0]
            counter[0] += 1
            stack.append(start)
            on_stack.add(start)
            while work:
                node, edge_iter = work[-1]
                advanced = False
                for edge in edge_iter:
                    child = edge.dst
                    if child == node:
                        cyclic.add(node)
                        continue
                    if child not in index_of:
                        index_of[child] = low[child] = counter[0]
                        counter[0] += 1
                        stack.append(child)
                        on_stack.add(child)
                        work.append((child, iter(adjacency.get(child, ()))))
                        advanced = True
                        break
                    if child in on_stack:
                        low[node] = min(low[node], index_of[child])
                if advanced:
                    continue
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[node])
                if low[node] == index_of[node]:
                    component = []
                    while True:
                        member = stack.pop()
                        on_stack.discard(member)
                        component.append(member)
                        if member == node:
                            break
                    if len(component) > 1:
                        cyclic.update(component)
        self._cyclic = cyclic
        return cyclic

    def stats(self) -> dict[str, Any]:
        return {
            "nodes": len(self.nodes),
            "edges": len(self.edges),
            "dead": len(self.dead_nodes()),
            "truncated": self.truncated,
            "truncation_reasons": list(self.truncation_reasons),
        }

    def to_json(self) -> dict[str, Any]:
        return {
            "root": self.root,
            "truncated": self.truncated,
            "truncation_reasons": list(self.truncation_reasons),
            "nodes": [
                {"key": n.key, "clock": n.clock, "depth": n.depth, "dead": n.dead}
                for n in self.nodes
            ],
            "edges": [
                {
                    "src": e.src,
                    "dst": e.dst,
                    "transition": e.transition_id,
                    "binding": e.binding,
                }
                for e in self.edges
            ],
        }


def _expr_min_places(expr: Expr) -> set[str]:
    found: set[str] = set()
    stack: list[Any] = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, MinOf):
            found.add(node.place_id)
        if isinstance(node, Expr):
            for f in dc_fields(node):
                stack.append(getattr(node, f.name))
        elif isinstance(node, tuple):
            stack.extend(node)
    return found


def _static_clusters(net: Net) -> dict[str, str]:
    """Union transitions that share any non-append-only place.

    A place is append-only when no transition consumes from it, every guard
    or output reference to it is a positive membership test, and no
    minimum-of view reads it; growth of such a place can enable but never
    disable or redirect anything, so sharing one does not order transitions.
    """
    consumed: set[str] = set()
    negative: set[str] = set()
    min_read: set[str] = set()
    touch: dict[str, list[tuple[str, bool]]] = {}

    for tid, transition in net.transitions.items():
        refs: list[tuple[str, bool]] = []
        for arc in net.input_arcs(tid):
            consumed.add(arc.place_id)
            refs.append((arc.place_id, False))
        exprs: list[Expr] = [transition.guard]
        for arc in net.output_arcs(tid):
            refs.append((arc.place_id, True))
            exprs.append(arc.expr)
        for expr in exprs:
            for pid, negated in member_places(expr):
                refs.append((pid, True))
                if negated:
                    negative.add(pid)
            for pid in _expr_min_places(expr):
                refs.append((pid, True))
                min_read.add(pid)
        touch[tid] = refs

    append_only = {
        pid
        for pid in net.places
        if pid not in consumed and pid not in negative and pid not in min_read
    }

    parent: dict[str, str] = {tid: tid for tid in net.transitions}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    by_place: dict[str, str] = {}
    for tid, refs in touch.items():
        for pid, _writes in refs:
            if pid in append_only:
                continue
            if pid in by_place:
                union(by_place[pid], tid)
            else:
                by_place[pid] = tid
    return {tid: find(tid) for tid in net.transitions}


def explore(
    net: Net,
    marking: Marking | None = None,
    bounds: ExploreBounds | None = None,
    *,
    clock: int = 0,
    reduce: bool = True,
    visible: Iterable[str] = (),
) -> ReachabilityGraph:
    """Breadth-first reachability with canonical dedup and budget tracking."""
    if net.submodules:
        net = flatten(net)
    bounds = bounds or ExploreBounds()
    visible_ids = frozenset(visible)
    clusters = _static_clusters(net) if reduce else None

    nodes: list[GraphNode] = []
    edges: list[GraphEdge] = []
    markings: list[tuple[Marking, int]] = []
    parent_edge: list[int | None] = []
    index: dict[str, int] = {}
    reasons: list[str] = []
    queue: deque[tuple[int, Marking, int, list[Firing], int]] = deque()

    def over_token_budget(m: Marking) -> bool:
        return any(
            len(m.tokens_in(pid)) > bounds.max_tokens_per_place for pid in m.places()
        )

    def note(reason: str) -> None:
        if reason not in reasons:
            reasons.append(reason)

    def intern_node(m: Marking, arrival: int, depth: int) -> tuple[int | None, bool]:
        advanced = next_active_clock(net, m, arrival)
        if advanced is None:
            key = m.canon_relative(arrival)
            active, firings = arrival, []
        else:
            active, firings = advanced
            key = m.canon_relative(active)
        existing = index.get(key)
        if existing is not None:
            return existing, False
        if len(nodes) >= bounds.max_nodes:
            note("node budget exhausted")
            return None, False
        idx = len(nodes)
        index[key] = idx
        nodes.append(GraphNode(key, active, depth, advanced is None))
        markings.append((m, active))
        parent_edge.append(None)
        if advanced is not None:
            queue.append((idx, m, active, firings, depth))
        return idx, True

    start = net.initial if marking is None else marking
    if over_token_budget(start):
        raise AnalysisError("initial marking exceeds the token budget")
    root_idx, _ = intern_node(start, clock, 0)
    if root_idx is None:
        raise AnalysisError("node budget too small for the initial marking")

    def expand(src: int, m: Marking, active: int, depth: int, firings: Sequence[Firing]) -> bool:
        found_new = False
        for firing in firings:
            successor = fire(net, m, active, firing)
            if over_token_budget(successor):
                note("token budget exceeded")
                continue
            child, fresh = intern_node(successor, active, depth + 1)
            if child is None:
                continue
            edges.append(GraphEdge(src, child, firing.transition_id, firing.canon()))
            if fresh:
                parent_edge[child] = len(edges) - 1
                found_new = True
        return found_new

    while queue:
        idx, m, active, firings, depth = queue.popleft()
        if depth >= bounds.max_depth:
            note("depth budget exhausted")
            continue
        chosen: Sequence[Firing] = firings
        rest: list[Firing] = []
        if clusters is not None and len(firings) > 1:
            groups: dict[str, list[Firing]] = {}
            for firing in firings:
                groups.setdefault(clusters[firing.transition_id], []).append(firing)
            eligible = [
                gid
                for gid in sorted(groups)
                if not any(f.transition_id in visible_ids for f in groups[gid])
            ]
            if eligible and len(groups) > 1:
                chosen = groups[eligible[0]]
                rest = [f for f in firings if f not in chosen]
        found_new = expand(idx, m, active, depth, chosen)
        if rest and not found_new:
            expand(idx, m, active, depth, rest)

    return ReachabilityGraph(
        nodes=nodes,
        edges=edges,
        root=root_idx,
        truncated=bool(reasons),
        truncation_reasons=tuple(reasons),
        _markings=markings,
        _parent_edge=parent_edge,
    )


def maximal_paths(graph: ReachabilityGraph, limit: int = 20000) -> list[tuple[str, ...]]:
    """All simple root-to-dead-marking transition sequences, sorted."""
    adjacency = graph.out_edges()
    results: list[tuple[str, ...]] = []

    def walk(node: int, seen: frozenset[int], trail: tuple[str, ...]) -> None:
        if graph.nodes[node].dead:
            results.append(trail)
            if len(results) > limit:
                raise AnalysisError(f"more than {limit} maximal paths")
            return
        for edge in adjacency.get(node, ()):
            if edge.dst in seen:
                continue
            walk(edge.dst, seen | {edge.dst}, trail + (edge.transition_id,))

    walk(graph.root, frozenset({graph.root}), ())
    return sorted(results)


def replay(
    net: Net,
    marking: Marking,
    clock: int,
    steps: Iterable[tuple[str, str]],
) -> tuple[Marking, int]:
    """Re-fire a recorded (transition, binding) sequence, advancing the clock
    only when the next step is not yet enabled."""
    for transition_id, binding in steps:
        while True:
            match = next(
                (
                    f
                    for f in all_enabled(net, marking, clock)
                    if f.transition_id == transition_id and f.canon() == binding
                ),
                None,
            )
            if match is not None:
                marking = fire(net, marking, clock, match)
                break
            future = marking.earliest_future(clock)
            if future is None:
                raise AnalysisError(
                    f"cannot replay {transition_id} with binding {binding}"
                )
            clock = future
    return marking, clock


@dataclass(frozen=True)
class AttackStep:
    threat_id: str
    service: str
    target_place: str
    consequence: str

    @property
    def label(self) -> str:
        return f"{self.target_place}:{self.threat_id}"

    def to_json(self) -> dict[str, str]:
        return {
            "threat": self.threat_id,
            "service": self.service,
            "place": self.target_place,
            "consequence": self.consequence,
        }


@dataclass(frozen=True)
class AttackPath:
    """A causal chain of exploited threats ending in a requirement violation."""

    steps: tuple[AttackStep, ...]
    violated: tuple[tuple[SecurityRequirement, bool], ...]
    witness: tuple[tuple[str, str], ...]
    loop_flag: bool

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(step.threat_id for step in self.steps)

    @property
    def entry_point(self) -> str:
        return self.steps[0].target_place

    @property
    def priority(self) -> int:
        return self.violated[0][0].priority

    def to_json(self) -> dict[str, Any]:
        return {
            "labels": list(self.labels),
            "steps": [step.to_json() for step in self.steps],
            "entry_point": self.entry_point,
            "priority": self.priority,
            "violated": [
                {**req.to_json(), "partial": partial} for req, partial in self.violated
            ],
            "loop": self.loop_flag,
            "witness": [[tid, binding] for tid, binding in self.witness],
        }


def _candidate_chains(
    threat: ThreatDefinition,
    catalog: ThreatCatalog,
    fired: frozenset[str],
    stack: tuple[str, ...] = (),
) -> list[tuple[str, ...]]:
    if not threat.requires:
        return [(threat.id,)]
    options: list[list[tuple[str, ...]]] = []
    for tag in threat.requires:
        providers = [
            p
            for p in catalog.threats.values()
            if p.consequence == tag and p.id in fired and p.id not in stack and p.id != threat.id
        ]
        chains: list[tuple[str, ...]] = []
        for provider in providers:
            chains.extend(
                _candidate_chains(provider, catalog, fired, stack + (threat.id,))
            )
        if not chains:
            return []
        options.append(chains)
    merged: list[tuple[str, ...]] = []
    for combo in product(*options):
        seen: list[str] = []
        for chain in combo:
            for tid in chain:
                if tid not in seen:
                    seen.append(tid)
        merged.append(tuple(seen) + (threat.id,))
    return merged


def _find_witness(
    graph: ReachabilityGraph,
    chain: Sequence[ThreatDefinition],
    link_consequence: Mapping[str, str],
) -> list[GraphEdge] | None:
    """Shortest path whose causal slice is exactly the chain.

    Other exploited threats may fire along the witness; what must hold is
    that reducing the witness's full link sequence (keep the endpoint, then
    scan backwards keeping each latest provider of a still-pending
    capability) yields the chain. The scan keeps an element exactly when its
    consequence is pending, so walking the graph backwards from the endpoint
    the pending multiset depends only on how many chain elements have been
    matched; any other link providing a pending capability would change the
    slice and prunes that branch.
    """
    pending: Counter[str] = Counter(chain[-1].requires)
    pend_at: list[Counter[str]] = [Counter(), +pending]
    for threat in reversed(chain[:-1]):
        if pending[threat.consequence] < 1:
            return None
        pending[threat.consequence] -= 1
        pending.update(threat.requires)
        pend_at.append(+pending)
    if +pending:
        return None

    incoming: dict[int, list[GraphEdge]] = {}
    for edge in graph.edges:
        incoming.setdefault(edge.dst, []).append(edge)
    expected = [link_transition_id(t.id) for t in reversed(chain)]
    total = len(chain)

    # State (u, m): the suffix from node u through the recorded edge matches
    # m trailing chain elements and skips nothing the slice would keep.
    back: dict[tuple[int, int], tuple[tuple[int, int] | None, GraphEdge]] = {}
    frontier: deque[tuple[int, int]] = deque()

    def push(state: tuple[int, int], parent: tuple[int, int] | None, edge: GraphEdge) -> None:
        if state not in back:
            back[state] = (parent, edge)
            frontier.append(state)

    for edge in graph.edges:
        if edge.transition_id == expected[0]:
            push((edge.src, 1), None, edge)
    goal: tuple[int, int] | None = None
    while frontier:
        node, matched = frontier.popleft()
        if node == graph.root and matched == total:
            goal = (node, matched)
            break
        for edge in incoming.get(node, ()):
            consequence = link_consequence.get(edge.transition_id)
            if matched < total and edge.transition_id == expected[matched]:
                push((edge.src, matched + 1), (node, matched), edge)
            elif consequence is not None and pend_at[matched][consequence]:
                continue
            else:
                push((edge.src, matched), (node, matched), edge)
    if goal is None:
        return None
    steps: list[GraphEdge] = []
    state: tuple[int, int] | None = goal
    while state is not None:
        state, edge = back[state]
        steps.append(edge)
    return steps


def enumerate_attack_paths(
    graph: ReachabilityGraph,
    catalog: ThreatCatalog,
    requirements: Iterable[SecurityRequirement],
) -> list[AttackPath]:
    """Each distinct causal chain whose final consequence violates a
    requirement, validated by (and carrying) a witness path in the graph."""
    reqs = list(requirements)
    fired = {e.transition_id for e in graph.edges}
    fired_threats = frozenset(
        t.id for t in catalog.threats.values() if link_transition_id(t.id) in fired
    )
    link_consequence = {
        link_transition_id(t.id): t.consequence for t in catalog.threats.values()
    }

    candidates: set[tuple[str, ...]] = set()
    for threat in catalog.threats.values():
        if threat.id not in fired_threats:
            continue
        if not violated_requirements([threat.consequence_payload()], reqs):
            continue
        candidates.update(_candidate_chains(threat, catalog, fired_threats))

    cyclic = graph.cyclic_nodes() if candidates else set()
    paths: list[AttackPath] = []
    for chain in sorted(candidates):
        witness = _find_witness(
            graph, [catalog.threats[tid] for tid in chain], link_consequence
        )
        if witness is None:
            continue
        threats = [catalog.threats[tid] for tid in chain]
        steps = tuple(
            AttackStep(t.id, t.service, t.target_place, t.consequence) for t in threats
        )
        violated = tuple(
            violated_requirements([t.consequence_payload() for t in threats], reqs)
        )
        touched = {graph.root} | {e.dst for e in witness}
        paths.append(
            AttackPath(
                steps=steps,
                violated=violated,
                witness=tuple((e.transition_id, e.binding) for e in witness),
                loop_flag=bool(touched & cyclic),
            )
        )
    paths.sort(key=lambda p: (p.priority, len(p.steps), p.labels))
    return paths


def centrality_report(paths: Sequence[AttackPath]) -> dict[str, dict[str, int]]:
    """How often each threat participates across paths, dense-ranked."""
    counts = Counter(tid for path in paths for tid in path.labels)
    report: dict[str, dict[str, int]] = {}
    rank = 0
    last_count: int | None = None
    for tid, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if count != last_count:
            rank += 1
            last_count = count
        report[tid] = {"count": count, "rank": rank}
    return report


def to_dot(graph: ReachabilityGraph, threat_ids: Iterable[str] = ()) -> str:
    """Graphviz rendering: dead markings double-circled, threat edges red."""
    threat_set = set(threat_ids)
    lines = ["digraph reachability {", "  rankdir=LR;"]
    for i, node in enumerate(graph.nodes):
        marking, _clock = graph.node_marking(i)
        summary = " ".join(
            f"{pid}:{len(marking.tokens_in(pid))}" for pid in sorted(marking.places())
        )
        if len(summary) > 60:
            summary = summary[:57] + "..."
        extras = ',peripheries=2' if node.dead else ""
        lines.append(f'  n{i} [label="{summary}"{extras}];')
    for edge in graph.edges:
        owner = edge.transition_id.split("/", 1)[0]
        color = ',color="red"' if owner in threat_set else ""
        lines.append(
            f'  n{edge.src} -> n{edge.dst} [label="{edge.transition_id}"{color}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Workload:
    """Traffic injected before analysis: login attempts and VM requests."""

    logins: tuple[tuple[Credentials, int], ...] = ()
    vm_requests: tuple[tuple[VmRequest, int], ...] = ()

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Workload":
        unknown = set(data) - {"logins", "vm_requests"}
        if unknown:
            raise InvalidScenario(f"unknown workload keys: {sorted(unknown)}")
        logins = []
        for item in data.get("logins", ()):
            extra = set(item) - {"username", "password", "at"}
            if extra:
                raise InvalidScenario(f"unknown login keys: {sorted(extra)}")
            logins.append(
                (Credentials(item["username"], item["password"]), item.get("at", 0))
            )
        requests = []
        for item in data.get("vm_requests", ()):
            extra = set(item) - {"username", "cpu", "ram", "disk", "wants_storage", "at"}
            if extra:
                raise InvalidScenario(f"unknown vm_request keys: {sorted(extra)}")
            requests.append(
                (
                    VmRequest(
                        item["username"],
                        item["cpu"],
                        item["ram"],
                        item["disk"],
                        item.get("wants_storage", False),
                    ),
                    item.get("at", 0),
                )
            )
        return cls(tuple(logins), tuple(requests))

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if self.logins:
            out["logins"] = [
                {"username": c.username, "password": c.password, "at": at}
                for c, at in self.logins
            ]
        if self.vm_requests:
            out["vm_requests"] = [
                {
                    "username": r.username,
                    "cpu": r.cpu,
                    "ram": r.ram,
                    "disk": r.disk,
                    "wants_storage": r.wants_storage,
                    "at": at,
                }
                for r, at in self.vm_requests
            ]
        return out


@dataclass
class Scenario:
    """A resolved analysis setup: cloud, catalog, toggles, goals, budgets."""

    name: str
    cloud: CloudConfig
    catalog: ThreatCatalog
    enabled: dict[str, bool]
    mitigations: tuple[str, ...]
    requirements: tuple[SecurityRequirement, ...]
    bounds: ExploreBounds
    workload: Workload


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidScenario(f"cannot read scenario {path!r}: {exc}") from exc
    allowed = {
        "name",
        "cloud",
        "catalog",
        "threats",
        "mitigations",
        "requirements",
        "bounds",
        "workload",
    }
    unknown = set(data) - allowed
    if unknown:
        raise InvalidScenario(f"unknown scenario keys: {sorted(unknown)}")
    base = os.path.dirname(os.path.abspath(path))
    if "cloud" not in data:
        raise InvalidScenario("scenario needs a cloud config reference")
    cloud = load_cloud_config(os.path.join(base, data["cloud"]))
    catalog_ref = data.get("catalog")
    if catalog_ref is not None:
        catalog = load_catalog(os.path.join(base, catalog_ref))
    elif os.environ.get("THREATFLOW_CATALOG"):
        catalog = load_catalog(os.environ["THREATFLOW_CATALOG"])
    else:
        raise InvalidScenario(
            "scenario has no catalog reference and THREATFLOW_CATALOG is unset"
        )

    enabled: dict[str, bool] = {}
    for item in data.get("threats", ()):
        extra = set(item) - {"id", "enabled"}
        if extra:
            raise InvalidScenario(f"unknown threat-toggle keys: {sorted(extra)}")
        tid = item.get("id")
        if tid not in catalog.threats:
            raise InvalidScenario(f"scenario toggles unknown threat {tid!r}")
        if tid in enabled:
            raise InvalidScenario(f"threat {tid!r} toggled twice")
        enabled[tid] = bool(item.get("enabled", True))

    requirements = tuple(
        SecurityRequirement.from_json(item) for item in data.get("requirements", ())
    )
    ranks = [req.priority for req in requirements]
    if len(set(ranks)) != len(ranks):
        raise InvalidScenario("requirement priorities must be unique")

    name = data.get("name") or os.path.splitext(os.path.basename(path))[0]
    return Scenario(
        name=name,
        cloud=cloud,
        catalog=catalog,
        enabled=enabled,
        mitigations=tuple(data.get("mitigations", ())),
        requirements=requirements,
        bounds=ExploreBounds.from_json(data.get("bounds", {})),
        workload=Workload.from_json(data.get("workload", {})),
    )


@dataclass
class Materialized:
    """Nets and markings ready for exploration."""

    bare_net: Net
    bare_initial: Marking
    attached_net: Net
    attached_initial: Marking
    threats: tuple[ThreatDefinition, ...]
    visible: frozenset[str]
    requirements: tuple[SecurityRequirement, ...]
    bounds: ExploreBounds
    catalog: ThreatCatalog


def _inject_workload(net: Net, marking: Marking, workload: Workload) -> Marking:
    for credentials, at in workload.logins:
        marking = inject_request(net, marking, credentials, at=at)
    for request, at in workload.vm_requests:
        marking = inject_request(net, marking, request, at=at)
    return marking


def materialize(
    scenario: Scenario,
    toggles: Mapping[str, bool] | None = None,
    mitigations: Iterable[str] = (),
) -> Materialized:
    enabled = dict(scenario.enabled)
    for tid, on in (toggles or {}).items():
        if tid not in scenario.catalog.threats:
            raise UnknownToggle(f"unknown threat id {tid!r}")
        enabled[tid] = bool(on)

    names = list(scenario.mitigations) + list(mitigations)
    resolved = resolve_mitigations(names, scenario.catalog)
    config = scenario.cloud
    removed_consequences: set[str] = set()
    for mitigation in resolved:
        if mitigation.kind == "disable-threat":
            enabled[mitigation.threat_id] = False
        elif mitigation.kind == "remove-link":
            removed_consequences.add(mitigation.consequence)
        else:
            if mitigation.flag != "strict_quota":
                raise InvalidScenario(
                    f"mitigation {mitigation.name!r} strengthens unknown flag "
                    f"{mitigation.flag!r}"
                )
            config = replace(config, strict_quota=True)

    threats = tuple(
        scenario.catalog.threats[tid] for tid, on in enabled.items() if on
    )
    links = tuple(
        scenario.catalog.links[t.id]
        for t in threats
        if t.id in scenario.catalog.links and t.consequence not in removed_consequences
    )

    cloud_net = build_cloud_net(config)
    bare = flatten(cloud_net)
    attached = flatten(attach(cloud_net, threats, links))
    return Materialized(
        bare_net=bare,
        bare_initial=_inject_workload(bare, bare.initial, scenario.workload),
        attached_net=attached,
        attached_initial=_inject_workload(attached, attached.initial, scenario.workload),
        threats=threats,
        visible=frozenset(link_transition_id(t.id) for t in threats),
        requirements=scenario.requirements,
        bounds=scenario.bounds,
        catalog=scenario.catalog,
    )


@dataclass
class AnalysisResult:
    """Everything one scenario run produces, JSON-ready."""

    scenario_name: str
    paths: list[AttackPath]
    centrality: dict[str, dict[str, int]]
    violations: list[tuple[SecurityRequirement, bool]]
    graph_nodes: int
    graph_edges: int
    graph_dead: int
    graph_truncated: bool
    truncation_reasons: tuple[str, ...]
    graph: ReachabilityGraph = dc_field(repr=False, default=None)

    def to_json(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario_name,
            "paths": [path.to_json() for path in self.paths],
            "centrality": self.centrality,
            "violations": [
                {**req.to_json(), "partial": partial}
                for req, partial in self.violations
            ],
            "graph": {
                "nodes": self.graph_nodes,
                "edges": self.graph_edges,
                "dead": self.graph_dead,
                "truncated": self.graph_truncated,
                "truncation_reasons": list(self.truncation_reasons),
            },
        }


def run_scenario(
    scenario: Scenario,
    toggles: Mapping[str, bool] | None = None,
    mitigations: Iterable[str] = (),
) -> AnalysisResult:
    mat = materialize(scenario, toggles=toggles, mitigations=mitigations)
    graph = explore(
        mat.attached_net,
        marking=mat.attached_initial,
        bounds=mat.bounds,
        visible=mat.visible,
    )
    paths = enumerate_attack_paths(graph, mat.catalog, mat.requirements)
    fired = {e.transition_id for e in graph.edges}
    achieved = [
        t.consequence_payload()
        for t in mat.threats
        if link_transition_id(t.id) in fired
    ]
    return AnalysisResult(
        scenario_name=scenario.name,
        paths=paths,
        centrality=centrality_report(paths),
        violations=violated_requirements(achieved, mat.requirements),
        graph_nodes=len(graph.nodes),
        graph_edges=len(graph.edges),
        graph_dead=len(graph.dead_nodes()),
        graph_truncated=graph.truncated,
        truncation_reasons=graph.truncation_reasons,
        graph=graph,
    )


@dataclass
class PathDiff:
    """Attack-path changes between a baseline run and a what-if variant."""

    removed: tuple[AttackPath, ...]
    surviving: tuple[AttackPath, ...]
    newly_exposed: tuple[AttackPath, ...]

    def to_json(self) -> dict[str, Any]:
        return {
            "removed": [p.to_json() for p in self.removed],
            "surviving": [p.to_json() for p in self.surviving],
            "newly_exposed": [p.to_json() for p in self.newly_exposed],
        }


@dataclass
class SpeculationOutcome:
    baseline: AnalysisResult
    variant: AnalysisResult
    diff: PathDiff

    def to_json(self) -> dict[str, Any]:
        return {
            "baseline": self.baseline.to_json(),
            "variant": self.variant.to_json(),
            "diff": self.diff.to_json(),
        }


def speculate(
    scenario: Scenario,
    toggles: Mapping[str, bool] | None = None,
    mitigations: Iterable[str] = (),
) -> SpeculationOutcome:
    baseline = run_scenario(scenario)
    variant = run_scenario(scenario, toggles=toggles, mitigations=mitigations)
    base_labels = {p.labels for p in baseline.paths}
    variant_labels = {p.labels for p in variant.paths}
    diff = PathDiff(
        removed=tuple(p for p in baseline.paths if p.labels not in variant_labels),
        surviving=tuple(p for p in baseline.paths if p.labels in variant_labels),
        newly_exposed=tuple(p for p in variant.paths if p.labels not in base_labels),
    )
    return SpeculationOutcome(baseline=baseline, variant=variant, diff=diff)
