"""JSON serialization for nets.

The on-disk shape is a single JSON object with `places`, `transitions`,
`arcs`, `initial_marking`, `submodules`, and `fusions` sections. Arcs are one
list: place-to-transition entries carry a `pattern`, transition-to-place
entries carry an `expr`. `dump_net`/`dumps_net` emit canonical bytes (sorted
keys, two-space indent, trailing newline) so a load/dump cycle reproduces a
canonically written file exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from .exprs import (
    expr_from_sexpr,
    expr_to_sexpr,
    pattern_from_sexpr,
    pattern_to_sexpr,
)
from .net import (
    Fusion,
    InputArc,
    Marking,
    Net,
    NetError,
    OutputArc,
    Place,
    Transition,
)
from .values import colorset_from_json, colorset_to_json

SCHEMA_VERSION = 1


def net_to_json(net: Net) -> dict:
    arcs: list[dict] = []
    for tid in sorted(net.transitions):
        for arc in net.inputs.get(tid, ()):
            arcs.append(
                {
                    "from": arc.place_id,
                    "to": tid,
                    "pattern": pattern_to_sexpr(arc.pattern),
                }
            )
        for out in net.outputs.get(tid, ()):
            entry = {
                "from": tid,
                "to": out.place_id,
                "expr": expr_to_sexpr(out.expr),
            }
            if out.count != 1:
                entry["count"] = out.count
            arcs.append(entry)

    return {
        "schema_version": SCHEMA_VERSION,
        "id": net.net_id,
        "places": [
            {
                "id": place.place_id,
                "type": colorset_to_json(place.colorset),
                "label": place.label,
            }
            for _, place in sorted(net.places.items())
        ],
        "transitions": [
            {
                "id": t.transition_id,
                "guard": expr_to_sexpr(t.guard),
                "delay": t.delay,
                "label": t.label,
            }
            for _, t in sorted(net.transitions.items())
        ],
        "arcs": arcs,
        "initial_marking": net.initial.to_json(),
        "submodules": {
            name: net_to_json(sub) for name, sub in sorted(net.submodules.items())
        },
        "fusions": [
            {
                "parent": f.parent_place,
                "submodule": f.submodule,
                "place": f.sub_place,
            }
            for f in net.fusions
        ],
    }


def net_from_json(data: Mapping) -> Net:
    if not isinstance(data, Mapping):
        raise NetError(f"net document must be an object, got {type(data).__name__}")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise NetError(f"unsupported schema_version {version!r}")
    net_id = data.get("id")
    if not isinstance(net_id, str) or not net_id:
        raise NetError("net is missing a non-empty id")

    net = Net(net_id=net_id)

    for entry in data.get("places", []):
        net.add_place(
            Place(
                place_id=_req_str(entry, "id", "place"),
                colorset=colorset_from_json(entry.get("type", "any")),
                label=entry.get("label", ""),
            )
        )

    inputs: dict[str, list[InputArc]] = {}
    outputs: dict[str, list[OutputArc]] = {}
    declared: list[tuple[Transition, Mapping]] = []
    for entry in data.get("transitions", []):
        tid = _req_str(entry, "id", "transition")
        guard = expr_from_sexpr(entry["guard"]) if "guard" in entry else None
        delay = entry.get("delay", 0)
        if not isinstance(delay, int) or isinstance(delay, bool):
            raise NetError(f"transition {tid!r} has non-integer delay")
        transition = Transition(
            transition_id=tid,
            guard=guard if guard is not None else Transition(tid).guard,
            delay=delay,
            label=entry.get("label", ""),
        )
        declared.append((transition, entry))
        inputs[tid] = []
        outputs[tid] = []

    for entry in data.get("arcs", []):
        src = _req_str(entry, "from", "arc")
        dst = _req_str(entry, "to", "arc")
        if dst in inputs and "pattern" in entry:
            inputs[dst].append(InputArc(src, pattern_from_sexpr(entry["pattern"])))
        elif src in inputs and "expr" in entry:
            count = entry.get("count", 1)
            if not isinstance(count, int) or isinstance(count, bool) or count < 1:
                raise NetError(f"arc {src!r}->{dst!r} has bad count {count!r}")
            outputs[src].append(OutputArc(dst, expr_from_sexpr(entry["expr"]), count))
        else:
            raise NetError(
                f"arc {src!r}->{dst!r} matches no transition or lacks pattern/expr"
            )

    for transition, _ in declared:
        tid = transition.transition_id
        net.add_transition(transition, inputs[tid], outputs[tid])

    net.initial = Marking.from_json(data.get("initial_marking", {}))

    for name, sub_data in data.get("submodules", {}).items():
        sub = net_from_json(sub_data)
        net.submodules[name] = sub
    fusion_list = []
    for entry in data.get("fusions", []):
        fusion_list.append(
            Fusion(
                parent_place=_req_str(entry, "parent", "fusion"),
                submodule=_req_str(entry, "submodule", "fusion"),
                sub_place=_req_str(entry, "place", "fusion"),
            )
        )
    net.fusions = tuple(fusion_list)
    return net


def dumps_net(net: Net) -> str:
    return canonical_json(net_to_json(net))


def dump_net(net: Net, path: str | Path) -> None:
    Path(path).write_text(dumps_net(net), encoding="utf-8")


def load_net(path: str | Path) -> Net:
    with open(path, "r", encoding="utf-8") as fh:
        return net_from_json(json.load(fh))


def canonical_json(obj: Any) -> str:
    """Stable text form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _req_str(entry: Mapping, key: str, what: str) -> str:
    value = entry.get(key)
    if not isinstance(value, str) or not value:
        raise NetError(f"{what} is missing a non-empty {key!r}")
    return value
