"""Net structure: places, transitions, arcs, markings, hierarchy, flattening.

A net is a bipartite graph of typed places and guarded transitions. Tokens are
timestamped values; a transition with delay d stamps produced tokens d ticks
into the future, and a token is only consumable once the clock reaches its
timestamp. Hierarchy is expressed with named submodules whose designated port
places fuse with a parent place; `flatten` compiles the hierarchy away by
prefixing submodule element ids and redirecting fused references, preserving
behaviour exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Iterable, Iterator, Mapping

from .exprs import (
    Const,
    Expr,
    Pattern,
    PlaceView,
    free_vars,
    member_places,
    pattern_vars,
    rewrite_member_places,
)
from .values import (
    ColorSet,
    TokenValue,
    value_from_json,
    value_sort_key,
    value_to_json,
)


class NetError(Exception):
    """Raised on structurally invalid nets or markings."""


@dataclass(frozen=True)
class Place:
    place_id: str
    colorset: ColorSet
    label: str = ""


@dataclass(frozen=True)
class Transition:
    transition_id: str
    guard: Expr = Const(True)
    delay: int = 0
    label: str = ""


@dataclass(frozen=True)
class InputArc:
    place_id: str
    pattern: Pattern


@dataclass(frozen=True)
class OutputArc:
    place_id: str
    expr: Expr
    count: int = 1


@dataclass(frozen=True)
class Fusion:
    """Identify a submodule's port place with a parent place."""

    parent_place: str
    submodule: str
    sub_place: str


@dataclass(frozen=True)
class TimedToken:
    at: int
    value: TokenValue

    def sort_key(self) -> tuple:
        return (self.at, value_sort_key(self.value))


def _sort_tokens(tokens: Iterable[TimedToken]) -> tuple[TimedToken, ...]:
    return tuple(sorted(tokens, key=TimedToken.sort_key))


class Marking(PlaceView):
    """Immutable multiset of timed tokens per place.

    Only places that hold at least one token appear in the mapping. Methods
    that change contents return a new marking.
    """

    __slots__ = ("_tokens",)

    def __init__(self, tokens: Mapping[str, Iterable[TimedToken]] = ()):
        data: dict[str, tuple[TimedToken, ...]] = {}
        source = tokens.items() if isinstance(tokens, Mapping) else tokens
        for place_id, toks in source:
            ordered = _sort_tokens(toks)
            if ordered:
                data[place_id] = ordered
        self._tokens = dict(sorted(data.items()))

    def tokens_in(self, place_id: str) -> tuple[TimedToken, ...]:
        return self._tokens.get(place_id, ())

    def values_in(self, place_id: str) -> set[TokenValue]:
        return {tok.value for tok in self._tokens.get(place_id, ())}

    def places(self) -> tuple[str, ...]:
        return tuple(self._tokens)

    def items(self) -> Iterator[tuple[str, tuple[TimedToken, ...]]]:
        return iter(self._tokens.items())

    def total_tokens(self) -> int:
        return sum(len(toks) for toks in self._tokens.values())

    def max_place_size(self) -> int:
        return max((len(toks) for toks in self._tokens.values()), default=0)

    def is_empty(self) -> bool:
        return not self._tokens

    def with_changes(
        self,
        remove: Iterable[tuple[str, TimedToken]] = (),
        add: Iterable[tuple[str, TimedToken]] = (),
    ) -> "Marking":
        data = {pid: list(toks) for pid, toks in self._tokens.items()}
        for place_id, tok in remove:
            bucket = data.get(place_id, [])
            try:
                bucket.remove(tok)
            except ValueError:
                raise NetError(
                    f"token {tok.value.canon()}@{tok.at} absent from {place_id}"
                ) from None
        for place_id, tok in add:
            data.setdefault(place_id, []).append(tok)
        return Marking({pid: toks for pid, toks in data.items() if toks})

    def earliest_future(self, clock: int) -> int | None:
        """Smallest token timestamp strictly after the clock, if any."""
        best: int | None = None
        for toks in self._tokens.values():
            for tok in toks:
                if tok.at > clock and (best is None or tok.at < best):
                    best = tok.at
        return best

    def canon(self) -> str:
        parts = []
        for place_id, toks in self._tokens.items():
            body = ",".join(f"{t.at}:{t.value.canon()}" for t in toks)
            parts.append(f"{place_id}=[{body}]")
        return ";".join(parts)

    def canon_relative(self, clock: int) -> str:
        """Canonical form with timestamps rebased against the clock.

        Every already-available token reads as offset 0, so states that
        differ only in when past tokens arrived are identified. Keeps
        cyclic behaviour (retries, failure loops) finite in the state graph.
        """
        parts = []
        for place_id, toks in self._tokens.items():
            rebased = sorted(
                (max(t.at - clock, 0), value_sort_key(t.value), t.value.canon())
                for t in toks
            )
            body = ",".join(f"{off}:{canon}" for off, _, canon in rebased)
            parts.append(f"{place_id}=[{body}]")
        return ";".join(parts)

    def to_json(self) -> dict:
        return {
            place_id: [
                {"at": tok.at, "value": value_to_json(tok.value)} for tok in toks
            ]
            for place_id, toks in self._tokens.items()
        }

    @staticmethod
    def from_json(data: Mapping) -> "Marking":
        tokens: dict[str, list[TimedToken]] = {}
        for place_id, entries in data.items():
            bucket = tokens.setdefault(place_id, [])
            for entry in entries:
                if not isinstance(entry, Mapping) or set(entry) != {"at", "value"}:
                    raise NetError(f"bad marking entry for {place_id}: {entry!r}")
                at = entry["at"]
                if not isinstance(at, int) or isinstance(at, bool) or at < 0:
                    raise NetError(f"bad timestamp for {place_id}: {at!r}")
                bucket.append(TimedToken(at, value_from_json(entry["value"])))
        return Marking(tokens)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Marking) and self._tokens == other._tokens

    def __hash__(self) -> int:
        return hash(self.canon())

    def __repr__(self) -> str:
        return f"Marking({self.canon()})"


@dataclass
class Net:
    """A net definition plus its initial marking and submodules."""

    net_id: str
    places: dict[str, Place] = dc_field(default_factory=dict)
    transitions: dict[str, Transition] = dc_field(default_factory=dict)
    inputs: dict[str, tuple[InputArc, ...]] = dc_field(default_factory=dict)
    outputs: dict[str, tuple[OutputArc, ...]] = dc_field(default_factory=dict)
    initial: Marking = dc_field(default_factory=Marking)
    submodules: dict[str, "Net"] = dc_field(default_factory=dict)
    fusions: tuple[Fusion, ...] = ()

    # -- construction helpers -------------------------------------------------

    def add_place(self, place: Place) -> None:
        if place.place_id in self.places:
            raise NetError(f"duplicate place id {place.place_id!r}")
        self.places[place.place_id] = place

    def add_transition(
        self,
        transition: Transition,
        inputs: Iterable[InputArc] = (),
        outputs: Iterable[OutputArc] = (),
    ) -> None:
        tid = transition.transition_id
        if tid in self.transitions:
            raise NetError(f"duplicate transition id {tid!r}")
        self.transitions[tid] = transition
        self.inputs[tid] = tuple(inputs)
        self.outputs[tid] = tuple(outputs)

    def add_submodule(self, name: str, sub: "Net", fusions: Iterable[Fusion]) -> None:
        if name in self.submodules:
            raise NetError(f"duplicate submodule name {name!r}")
        self.submodules[name] = sub
        self.fusions = self.fusions + tuple(fusions)

    # -- derived structure -----------------------------------------------------

    def input_arcs(self, transition_id: str) -> tuple[InputArc, ...]:
        return self.inputs.get(transition_id, ())

    def output_arcs(self, transition_id: str) -> tuple[OutputArc, ...]:
        return self.outputs.get(transition_id, ())

    def consumers_of(self, place_id: str) -> tuple[str, ...]:
        return tuple(
            tid
            for tid in sorted(self.transitions)
            if any(arc.place_id == place_id for arc in self.inputs.get(tid, ()))
        )

    def transition_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.transitions))

    def is_flat(self) -> bool:
        return not self.submodules


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_net(net: Net) -> list[str]:
    """Collect structural defects; an empty list means the net is well formed."""
    defects: list[str] = []
    where = net.net_id

    for tid in net.transitions:
        if tid in net.places:
            defects.append(f"{where}: id {tid!r} used for both a place and a transition")

    for tid, transition in sorted(net.transitions.items()):
        if transition.delay < 0:
            defects.append(f"{where}: transition {tid!r} has negative delay")
        bound: list[str] = []
        for arc in net.inputs.get(tid, ()):
            if arc.place_id not in net.places:
                defects.append(
                    f"{where}: transition {tid!r} consumes from unknown place {arc.place_id!r}"
                )
            for name in pattern_vars(arc.pattern):
                if name in bound:
                    defects.append(
                        f"{where}: transition {tid!r} binds variable {name!r} twice"
                    )
                bound.append(name)
        available = set(bound)
        missing = free_vars(transition.guard) - available
        if missing:
            defects.append(
                f"{where}: guard of {tid!r} uses unbound variables {sorted(missing)}"
            )
        for place_id, _ in member_places(transition.guard):
            if place_id not in net.places:
                defects.append(
                    f"{where}: guard of {tid!r} reads unknown place {place_id!r}"
                )
        for arc in net.outputs.get(tid, ()):
            if arc.place_id not in net.places:
                defects.append(
                    f"{where}: transition {tid!r} produces to unknown place {arc.place_id!r}"
                )
            if arc.count < 1:
                defects.append(
                    f"{where}: output arc of {tid!r} has non-positive count"
                )
            missing = free_vars(arc.expr) - available
            if missing:
                defects.append(
                    f"{where}: output of {tid!r} uses unbound variables {sorted(missing)}"
                )

    for place_id in net.initial.places():
        place = net.places.get(place_id)
        if place is None:
            defects.append(f"{where}: initial marking references unknown place {place_id!r}")
            continue
        for tok in net.initial.tokens_in(place_id):
            if not place.colorset.contains(tok.value):
                defects.append(
                    f"{where}: initial token {tok.value.canon()} violates type of {place_id!r}"
                )

    for fusion in net.fusions:
        sub = net.submodules.get(fusion.submodule)
        if sub is None:
            defects.append(f"{where}: fusion references unknown submodule {fusion.submodule!r}")
            continue
        parent = net.places.get(fusion.parent_place)
        child = sub.places.get(fusion.sub_place)
        if parent is None:
            defects.append(
                f"{where}: fusion references unknown parent place {fusion.parent_place!r}"
            )
        if child is None:
            defects.append(
                f"{where}: fusion references unknown place {fusion.sub_place!r} "
                f"in submodule {fusion.submodule!r}"
            )
        if parent is not None and child is not None:
            if parent.colorset != child.colorset:
                defects.append(
                    f"{where}: fusion {fusion.parent_place!r}~"
                    f"{fusion.submodule}/{fusion.sub_place} joins mismatched types"
                )

    for name, sub in sorted(net.submodules.items()):
        defects.extend(validate_net(sub))

    return defects


# ---------------------------------------------------------------------------
# Flattening
# ---------------------------------------------------------------------------


def flatten(net: Net) -> Net:
    """Compile submodules away into a single flat net.

    Submodule element ids gain a "<name>/" prefix. A fused port place
    disappears; everything that referenced it uses the parent place instead,
    and any tokens it held initially move to the parent place.
    """
    if net.is_flat():
        return net

    flat = Net(net_id=net.net_id)
    for place in net.places.values():
        flat.add_place(place)
    for tid, transition in net.transitions.items():
        flat.add_transition(transition, net.inputs.get(tid, ()), net.outputs.get(tid, ()))

    merged: dict[str, list[TimedToken]] = {
        pid: list(toks) for pid, toks in net.initial.items()
    }

    for name, raw_sub in sorted(net.submodules.items()):
        sub = flatten(raw_sub)
        rename: dict[str, str] = {}
        for fusion in net.fusions:
            if fusion.submodule == name:
                rename[fusion.sub_place] = fusion.parent_place
        for pid, place in sub.places.items():
            if pid in rename:
                continue
            new_id = f"{name}/{pid}"
            rename[pid] = new_id
            flat.add_place(Place(new_id, place.colorset, place.label))
        for tid, transition in sub.transitions.items():
            new_tid = f"{name}/{tid}"
            guard = rewrite_member_places(transition.guard, rename)
            new_inputs = tuple(
                InputArc(rename[arc.place_id], arc.pattern)
                for arc in sub.inputs.get(tid, ())
            )
            new_outputs = tuple(
                OutputArc(
                    rename[arc.place_id],
                    rewrite_member_places(arc.expr, rename),
                    arc.count,
                )
                for arc in sub.outputs.get(tid, ())
            )
            flat.add_transition(
                Transition(new_tid, guard, transition.delay, transition.label),
                new_inputs,
                new_outputs,
            )
        for pid, toks in sub.initial.items():
            merged.setdefault(rename[pid], []).extend(toks)

    flat.initial = Marking(merged)
    return flat
