"""Seeded generator of small well-formed nets in document form.

Used to fuzz the engine against the reference semantics in oracles.py. Every
generated net verifies cleanly: patterns match the typed shape of their
source place, guards only reference bound variables with compatible types,
and output expressions produce values of the target place's type.
"""

from __future__ import annotations

import random
from typing import Any

PLACE_KINDS = ("count", "text", "record", "pair")

_KIND_TYPE = {
    "count": "count",
    "text": "text",
    "record": {"record": {"a": "count", "b": "count"}},
    "pair": {"tuple": ["count", "count"]},
}


def _random_value(rng: random.Random, kind: str) -> Any:
    if kind == "count":
        return rng.randrange(0, 4)
    if kind == "text":
        return rng.choice(["red", "blue", "green"])
    if kind == "record":
        return {"a": rng.randrange(0, 4), "b": rng.randrange(0, 4)}
    return [rng.randrange(0, 4), rng.randrange(0, 4)]


def _pattern_for(rng: random.Random, kind: str, prefix: str) -> tuple[list, dict[str, str]]:
    """Pattern plus the count-typed expression atoms it makes available."""
    if kind == "count":
        var = f"{prefix}c"
        return ["bind", var], {var: "count"}
    if kind == "text":
        var = f"{prefix}s"
        return ["bind", var], {var: "text"}
    if kind == "record":
        if rng.random() < 0.5:
            var = f"{prefix}r"
            return ["bind", var], {var: "record"}
        va, vb = f"{prefix}a", f"{prefix}b"
        return ["fields", "a", va, "b", vb], {va: "count", vb: "count"}
    if rng.random() < 0.5:
        var = f"{prefix}p"
        return ["bind", var], {var: "pair"}
    v1, v2 = f"{prefix}x", f"{prefix}y"
    return ["parts", v1, v2], {v1: "count", v2: "count"}


def _count_atoms(vars_by_type: dict[str, str]) -> list[list]:
    atoms: list[list] = []
    for name, kind in sorted(vars_by_type.items()):
        if kind == "count":
            atoms.append(["var", name])
        elif kind == "record":
            atoms.append(["field", ["var", name], "a"])
            atoms.append(["field", ["var", name], "b"])
    return atoms


def _guard_for(
    rng: random.Random,
    vars_by_type: dict[str, str],
    place_kinds: dict[str, str],
    var_sources: dict[str, str] | None = None,
) -> Any:
    clauses: list[Any] = []
    atoms = _count_atoms(vars_by_type)
    if len(atoms) >= 2 and rng.random() < 0.6:
        left, right = rng.sample(atoms, 2)
        clauses.append([rng.choice(["eq", "ne", "lt", "le", "gt", "ge"]), left, right])
    if atoms and rng.random() < 0.4:
        clauses.append(
            [rng.choice(["le", "ge", "ne"]), rng.choice(atoms), ["lit", rng.randrange(0, 4)]]
        )
    if rng.random() < 0.35:
        for name, kind in sorted(vars_by_type.items()):
            targets = [p for p, k in sorted(place_kinds.items()) if k == kind]
            if targets:
                clauses.append(
                    [rng.choice(["in", "not-in"]), ["var", name], rng.choice(targets)]
                )
                break
    if var_sources and rng.random() < 0.3:
        # Pin against the least token of the variable's own source place:
        # that place is never empty while the binding under test exists.
        name, pid = rng.choice(sorted(var_sources.items()))
        clauses.append([rng.choice(["eq", "ne"]), ["var", name], ["min", pid]])
    if not clauses:
        return True
    if len(clauses) == 1:
        return clauses[0]
    return [rng.choice(["and", "or"]), *clauses]


def _output_expr(rng: random.Random, kind: str, vars_by_type: dict[str, str]) -> Any:
    same = [["var", n] for n, k in sorted(vars_by_type.items()) if k == kind]
    atoms = _count_atoms(vars_by_type)
    if kind == "count":
        pool = same + atoms + [["lit", rng.randrange(0, 4)]]
        return rng.choice(pool)
    if kind == "text":
        pool = same + [["lit", rng.choice(["red", "blue", "green"])]]
        return rng.choice(pool)
    if kind == "record":
        if same and rng.random() < 0.5:
            return rng.choice(same)
        parts = atoms + [["lit", rng.randrange(0, 4)]]
        return ["record", "a", rng.choice(parts), "b", rng.choice(parts)]
    if same and rng.random() < 0.5:
        return rng.choice(same)
    parts = atoms + [["lit", rng.randrange(0, 4)]]
    return ["tuple", rng.choice(parts), rng.choice(parts)]


def random_net_doc(seed: int) -> dict:
    """A small valid net document, deterministic in the seed."""
    rng = random.Random(seed)
    n_places = rng.randrange(2, 6)
    place_kinds = {f"P{i}": rng.choice(PLACE_KINDS) for i in range(n_places)}

    places = [
        {"id": pid, "type": _KIND_TYPE[kind], "label": ""}
        for pid, kind in sorted(place_kinds.items())
    ]
    marking: dict[str, list] = {}
    for pid, kind in sorted(place_kinds.items()):
        toks = [
            {"at": rng.randrange(0, 3), "value": _random_value(rng, kind)}
            for _ in range(rng.randrange(0, 5))
        ]
        if toks:
            marking[pid] = toks

    transitions = []
    arcs = []
    for i in range(rng.randrange(1, 5)):
        tid = f"T{i}"
        vars_by_type: dict[str, str] = {}
        var_sources: dict[str, str] = {}
        n_in = rng.randrange(1, 3)
        sources = [rng.choice(sorted(place_kinds)) for _ in range(n_in)]
        for j, pid in enumerate(sources):
            pattern, new_vars = _pattern_for(rng, place_kinds[pid], f"t{i}i{j}")
            vars_by_type.update(new_vars)
            if pattern[0] == "bind":
                var_sources[pattern[1]] = pid
            arcs.append({"from": pid, "to": tid, "pattern": pattern})
        guard = _guard_for(rng, vars_by_type, place_kinds, var_sources)
        for _ in range(rng.randrange(0, 3)):
            target = rng.choice(sorted(place_kinds))
            entry = {
                "from": tid,
                "to": target,
                "expr": _output_expr(rng, place_kinds[target], vars_by_type),
            }
            if rng.random() < 0.2:
                entry["count"] = 2
            arcs.append(entry)
        transitions.append(
            {"id": tid, "guard": guard, "delay": rng.randrange(0, 3), "label": ""}
        )

    return {
        "schema_version": 1,
        "id": f"fuzz-{seed}",
        "places": places,
        "transitions": transitions,
        "arcs": arcs,
        "initial_marking": marking,
        "submodules": {},
        "fusions": [],
    }
