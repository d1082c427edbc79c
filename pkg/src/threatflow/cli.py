"""Command-line front end for the analysis pipeline.

Commands cover the whole workflow: validate a cloud model, simulate and
explore it, enumerate attack paths, diff what-if variants, maintain the
threat catalog, export report artifacts, and serve the HTTP API.

Exit codes: 0 success, 1 domain failure (structural defects, unknown ids,
invalid scenarios), 2 unreadable or unparseable input. For a fixed command
line the stdout bytes are stable across runs; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Any, Sequence

from .analysis import (
    AnalysisError,
    AnalysisResult,
    InvalidScenario,
    Scenario,
    SpeculationOutcome,
    UnknownToggle,
    explore,
    load_scenario,
    materialize,
    run_scenario,
    speculate,
    to_dot,
)
from .cloud import (
    CloudConfig,
    Credentials,
    InvalidConfig,
    TypeMismatch,
    VmRequest,
    build_cloud_net,
    inject_request,
)
from .hlpn import flatten
from .hlpn.engine import simulate
from .hlpn.exprs import ExprError
from .hlpn.io import net_from_json
from .hlpn.net import NetError, validate_net
from .hlpn.values import ValueError_
from .ingest import (
    CatalogStore,
    IngestError,
    UnknownId,
    UnknownPlace,
    annotate,
    default_catalog_path,
    import_records,
)
from .threats import InvalidThreat, UnknownMitigation, UnresolvedLink

_IO_ERRORS = (OSError, json.JSONDecodeError, IngestError)
_DOMAIN_ERRORS = (
    AnalysisError,
    InvalidScenario,
    UnknownToggle,
    InvalidThreat,
    UnresolvedLink,
    UnknownMitigation,
    InvalidConfig,
    TypeMismatch,
    NetError,
    ExprError,
    ValueError_,
    UnknownId,
    UnknownPlace,
)


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(doc: Any) -> None:
    _emit(json.dumps(doc, indent=1, sort_keys=True))


def _read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _load_scenario_checked(path: str) -> Scenario:
    # Read the raw file first so unreadable input exits 2, not 1.
    _read_json(path)
    return load_scenario(path)


def _override_bounds(scenario: Scenario, args: argparse.Namespace) -> None:
    changes = {}
    if getattr(args, "max_nodes", None) is not None:
        changes["max_nodes"] = args.max_nodes
    if getattr(args, "max_depth", None) is not None:
        changes["max_depth"] = args.max_depth
    if getattr(args, "max_tokens", None) is not None:
        changes["max_tokens_per_place"] = args.max_tokens
    if changes:
        scenario.bounds = replace(scenario.bounds, **changes)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _validate_net_doc(doc: Any) -> int:
    net = net_from_json(doc)
    if net.submodules:
        net = flatten(net)
    defects = validate_net(net)
    for defect in defects:
        _emit(f"defect: {defect}")
    if defects:
        return 1
    _emit(f"net: ok ({len(net.places)} places, {len(net.transitions)} transitions)")
    return 0


def _validate_cloud_doc(doc: Any) -> int:
    config = CloudConfig.from_json(doc)
    net = flatten(build_cloud_net(config))
    defects = validate_net(net)
    for defect in defects:
        _emit(f"defect: {defect}")
    if defects:
        return 1
    _emit(f"net: ok ({len(net.places)} places, {len(net.transitions)} transitions)")

    marking = net.initial
    for user in config.users:
        quota = config.quotas[user.username]
        marking = inject_request(
            net, marking, Credentials(user.username, user.password), at=0
        )
        marking = inject_request(
            net,
            marking,
            VmRequest(user.username, quota.cpu, quota.ram, quota.disk),
            at=0,
        )
    graph = explore(net, marking=marking)
    if graph.truncated:
        _emit("termination: inconclusive (exploration truncated)")
        return 1
    stuck = [
        idx
        for idx in graph.dead_nodes()
        if not graph.node_marking(idx)[0].tokens_in("VM")
    ]
    if stuck:
        _emit(f"termination: {len(stuck)} dead markings lack a VM token")
        for idx in stuck[:5]:
            _emit(f"dead: {graph.nodes[idx].key}")
        return 1
    _emit(
        f"termination: ok ({len(graph.dead_nodes())} dead markings, "
        "every one holds a VM token)"
    )
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    doc = _read_json(args.model)
    if isinstance(doc, dict) and ("places" in doc or "transitions" in doc):
        return _validate_net_doc(doc)
    return _validate_cloud_doc(doc)


# ---------------------------------------------------------------------------
# simulate / explore
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _load_scenario_checked(args.scenario)
    mat = materialize(scenario)
    net = mat.attached_net if args.attached else mat.bare_net
    marking = mat.attached_initial if args.attached else mat.bare_initial
    trace = simulate(net, args.steps, args.seed, marking=marking)
    _emit(trace.to_text())
    return 0


def cmd_explore(args: argparse.Namespace) -> int:
    scenario = _load_scenario_checked(args.scenario)
    _override_bounds(scenario, args)
    mat = materialize(scenario)
    net = mat.attached_net if args.attached else mat.bare_net
    marking = mat.attached_initial if args.attached else mat.bare_initial
    visible = mat.visible if args.attached else frozenset()
    graph = explore(net, marking=marking, bounds=mat.bounds, visible=visible)
    _dump(
        {
            "nodes": len(graph.nodes),
            "edges": len(graph.edges),
            "dead": len(graph.dead_nodes()),
            "truncated": graph.truncated,
            "truncation_reasons": list(graph.truncation_reasons),
        }
    )
    return 0


# ---------------------------------------------------------------------------
# paths / speculate
# ---------------------------------------------------------------------------


def _render_report(result: AnalysisResult) -> str:
    lines = [
        f"scenario: {result.scenario_name}",
        f"graph: {result.graph_nodes} nodes, {result.graph_edges} edges, "
        f"{result.graph_dead} dead"
        + (" (truncated)" if result.graph_truncated else ""),
        f"attack paths: {len(result.paths)}",
    ]
    width = len(str(len(result.paths)))
    for i, path in enumerate(result.paths, 1):
        chain = " -> ".join(path.labels)
        marks = f"entry {path.entry_point}, priority {path.priority}"
        if path.loop_flag:
            marks += ", loop"
        lines.append(f" {i:>{width}}. {chain}  [{marks}]")
    if result.violations:
        lines.append("violated requirements:")
        for req, partial in result.violations:
            note = " (partial)" if partial else ""
            lines.append(f"  {req.axis} priority {req.priority}{note}")
    if result.centrality:
        lines.append("centrality:")
        for tid, entry in result.centrality.items():
            lines.append(f"  {tid}: {entry['count']} paths, rank {entry['rank']}")
    return "\n".join(lines) + "\n"


def cmd_paths(args: argparse.Namespace) -> int:
    scenario = _load_scenario_checked(args.scenario)
    _override_bounds(scenario, args)
    result = run_scenario(scenario)
    if args.format == "json":
        _dump(result.to_json())
    elif args.format == "dot":
        _emit(to_dot(result.graph, scenario.catalog.threats))
    else:
        _emit(_render_report(result))
    return 0


def _render_diff(outcome: SpeculationOutcome) -> str:
    lines = [
        f"scenario: {outcome.baseline.scenario_name}",
        f"baseline paths: {len(outcome.baseline.paths)}",
        f"variant paths: {len(outcome.variant.paths)}",
    ]
    for title, paths in (
        ("removed", outcome.diff.removed),
        ("surviving", outcome.diff.surviving),
        ("newly exposed", outcome.diff.newly_exposed),
    ):
        lines.append(f"{title}:")
        if not paths:
            lines.append("  (none)")
        for path in paths:
            lines.append("  " + " -> ".join(path.labels))
    return "\n".join(lines) + "\n"


def cmd_speculate(args: argparse.Namespace) -> int:
    scenario = _load_scenario_checked(args.scenario)
    _override_bounds(scenario, args)
    outcome = speculate(
        scenario, toggles=dict(args.toggle), mitigations=args.mitigate
    )
    if args.format == "json":
        _dump(outcome.to_json())
    else:
        _emit(_render_diff(outcome))
    return 0


# ---------------------------------------------------------------------------
# ingest / annotate
# ---------------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    store = CatalogStore(args.catalog or default_catalog_path())
    result = import_records(args.feed)
    added = set(store.add_drafts(result.drafts))
    for draft in result.drafts:
        if draft.id in added:
            _emit(f"imported {draft.id}")
        else:
            _emit(f"skipped {draft.id} (already known)")
    for error in result.errors:
        _emit(f"error {error.id}: {error.reason}")
    _emit(
        f"catalog: {store.path} ({len(store.drafts)} drafts, "
        f"{len(store.threats)} threats)"
    )
    return 0


def cmd_annotate(args: argparse.Namespace) -> int:
    store = CatalogStore(args.catalog or default_catalog_path())
    mapping: dict[str, Any] = {
        "target_place": args.place,
        "consequence": args.consequence,
    }
    if args.action is not None:
        mapping["action"] = args.action
    if args.service is not None:
        mapping["service"] = args.service
    if args.requires:
        mapping["requires"] = tuple(args.requires)
    threat = annotate(store, args.id, mapping)
    _dump(threat.to_json())
    return 0


# ---------------------------------------------------------------------------
# export / serve
# ---------------------------------------------------------------------------


def cmd_export(args: argparse.Namespace) -> int:
    import os

    scenario = _load_scenario_checked(args.scenario)
    _override_bounds(scenario, args)
    result = run_scenario(scenario)
    os.makedirs(args.out, exist_ok=True)
    artifacts = {
        f"{scenario.name}.dot": to_dot(result.graph, scenario.catalog.threats),
        f"{scenario.name}-paths.json": json.dumps(
            result.to_json()["paths"], indent=1, sort_keys=True
        )
        + "\n",
        f"{scenario.name}-report.txt": _render_report(result),
    }
    for filename, text in artifacts.items():
        target = os.path.join(args.out, filename)
        with open(target, "w", encoding="utf-8") as handle:
            handle.write(text)
        _emit(f"wrote {target}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    app = create_app(
        scenario_dir=args.scenario_dir,
        catalog_path=args.catalog,
        frontend_dir=args.frontend,
    )
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------


def _toggle(text: str) -> tuple[str, bool]:
    tid, sep, value = text.partition("=")
    if not sep or value not in ("on", "off", "true", "false"):
        raise argparse.ArgumentTypeError(
            f"toggle must look like THREAT-ID=on|off, got {text!r}"
        )
    return tid, value in ("on", "true")


def _add_bounds_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--max-nodes", type=int, default=None)
    sub.add_argument("--max-depth", type=int, default=None)
    sub.add_argument("--max-tokens", type=int, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threatflow",
        description="Attack-path analysis for cloud models built on timed, "
        "colored Petri nets.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("validate", help="check a cloud config or net file")
    sub.add_argument("model")
    sub.set_defaults(func=cmd_validate)

    sub = commands.add_parser("simulate", help="run one randomized trace")
    sub.add_argument("scenario")
    sub.add_argument("--steps", type=int, default=50)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--attached", action="store_true")
    sub.set_defaults(func=cmd_simulate)

    sub = commands.add_parser("explore", help="build the state space, print stats")
    sub.add_argument("scenario")
    sub.add_argument("--attached", action="store_true")
    _add_bounds_flags(sub)
    sub.set_defaults(func=cmd_explore)

    sub = commands.add_parser("paths", help="enumerate attack paths")
    sub.add_argument("scenario")
    sub.add_argument("--format", choices=("report", "json", "dot"), default="report")
    sub.add_argument("--seed", type=int, default=0)
    _add_bounds_flags(sub)
    sub.set_defaults(func=cmd_paths)

    sub = commands.add_parser("speculate", help="diff a what-if variant")
    sub.add_argument("scenario")
    sub.add_argument(
        "--toggle", type=_toggle, action="append", default=[], metavar="ID=on|off"
    )
    sub.add_argument("--mitigate", action="append", default=[], metavar="NAME")
    sub.add_argument("--format", choices=("report", "json"), default="report")
    sub.add_argument("--seed", type=int, default=0)
    _add_bounds_flags(sub)
    sub.set_defaults(func=cmd_speculate)

    sub = commands.add_parser("ingest", help="import vulnerability records as drafts")
    sub.add_argument("feed")
    sub.add_argument("--catalog", default=None)
    sub.set_defaults(func=cmd_ingest)

    sub = commands.add_parser("annotate", help="complete a draft threat entry")
    sub.add_argument("id")
    sub.add_argument("--place", required=True)
    sub.add_argument("--consequence", required=True)
    sub.add_argument("--action", default=None)
    sub.add_argument("--service", default=None)
    sub.add_argument("--requires", action="append", default=[], metavar="TAG")
    sub.add_argument("--catalog", default=None)
    sub.set_defaults(func=cmd_annotate)

    sub = commands.add_parser("export", help="write DOT, path, and report files")
    sub.add_argument("scenario")
    sub.add_argument("--out", required=True)
    _add_bounds_flags(sub)
    sub.set_defaults(func=cmd_export)

    sub = commands.add_parser("serve", help="run the HTTP API")
    sub.add_argument("--host", default="127.0.0.1")
    sub.add_argument("--port", type=int, default=8000)
    sub.add_argument("--scenario-dir", default="scenarios")
    sub.add_argument("--catalog", default=None)
    sub.add_argument("--frontend", default=None)
    sub.set_defaults(func=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
