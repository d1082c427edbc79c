"""Execution kernel: binding enumeration, firing, clock advance, simulation.

Semantics in brief:

- A token is consumable once the clock has reached its timestamp; guard
  membership tests see every token in a place regardless of timestamp.
- A transition is enabled under a binding when each input arc can claim a
  distinct available token matching its pattern, shared variables agree, and
  the guard holds. Identical bindings arising from different token choices
  collapse to one.
- Firing consumes, per input arc, the oldest available token equal to the
  value the arc's pattern reconstructs from the binding, then produces each
  output arc's value stamped `delay` ticks into the future.
- A step fires one enabled transition at the first clock at which anything
  is enabled, advancing the clock across idle gaps. The candidate list is
  sorted by (transition id, canonical binding) and the RNG is consulted with
  exactly one randrange call per step, even for a single candidate, so equal
  seeds give byte-equal traces.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from .exprs import eval_guard, eval_value, match_pattern, pattern_token
from .net import Marking, Net, NetError, TimedToken
from .values import TokenValue


def binding_canon(binding: Mapping[str, TokenValue]) -> str:
    inner = ",".join(f"{k}={binding[k].canon()}" for k in sorted(binding))
    return "{" + inner + "}"


@dataclass(frozen=True)
class Firing:
    """A transition together with one enabling binding."""

    transition_id: str
    binding: tuple[tuple[str, TokenValue], ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.binding, key=lambda kv: kv[0]))
        object.__setattr__(self, "binding", ordered)

    def binding_map(self) -> dict[str, TokenValue]:
        return dict(self.binding)

    def canon(self) -> str:
        return binding_canon(dict(self.binding))

    def sort_key(self) -> tuple[str, str]:
        return (self.transition_id, self.canon())


def transition_bindings(
    net: Net, marking: Marking, clock: int, transition_id: str
) -> list[Firing]:
    """Distinct bindings enabling one transition, sorted canonically."""
    transition = net.transitions[transition_id]
    arcs = net.input_arcs(transition_id)

    per_arc: list[list[tuple[tuple[str, int], dict[str, TokenValue]]]] = []
    for arc in arcs:
        candidates = []
        for index, tok in enumerate(marking.tokens_in(arc.place_id)):
            if tok.at > clock:
                continue
            bound = match_pattern(arc.pattern, tok.value)
            if bound is not None:
                candidates.append(((arc.place_id, index), bound))
        if not candidates:
            return []
        per_arc.append(candidates)

    found: dict[str, Firing] = {}
    for combo in _combinations(per_arc):
        merged: dict[str, TokenValue] = {}
        ok = True
        for _, bound in combo:
            for name, value in bound.items():
                if name in merged and merged[name] != value:
                    ok = False
                    break
                merged[name] = value
            if not ok:
                break
        if not ok:
            continue
        if not eval_guard(transition.guard, merged, marking):
            continue
        firing = Firing(transition_id, tuple(merged.items()))
        found.setdefault(firing.canon(), firing)
    return [found[key] for key in sorted(found)]


def _combinations(
    per_arc: list[list[tuple[tuple[str, int], dict[str, TokenValue]]]]
) -> Iterable[tuple]:
    """Cartesian product over arcs that never reuses one token instance."""
    combo: list[tuple[tuple[str, int], dict[str, TokenValue]]] = []
    used: set[tuple[str, int]] = set()

    def descend(depth: int):
        if depth == len(per_arc):
            yield tuple(combo)
            return
        for key, bound in per_arc[depth]:
            if key in used:
                continue
            used.add(key)
            combo.append((key, bound))
            yield from descend(depth + 1)
            combo.pop()
            used.remove(key)

    yield from descend(0)


def all_enabled(net: Net, marking: Marking, clock: int) -> list[Firing]:
    firings: list[Firing] = []
    for tid in net.transition_ids():
        firings.extend(transition_bindings(net, marking, clock, tid))
    firings.sort(key=Firing.sort_key)
    return firings


def fire(net: Net, marking: Marking, clock: int, firing: Firing) -> Marking:
    """Successor marking for one firing at the given clock."""
    transition = net.transitions[firing.transition_id]
    binding = firing.binding_map()

    work: dict[str, list[TimedToken]] = {
        pid: list(toks) for pid, toks in marking.items()
    }
    for arc in net.input_arcs(firing.transition_id):
        wanted = pattern_token(arc.pattern, binding)
        bucket = work.get(arc.place_id, [])
        pick = None
        for tok in sorted(bucket, key=TimedToken.sort_key):
            if tok.at <= clock and tok.value == wanted:
                pick = tok
                break
        if pick is None:
            raise NetError(
                f"cannot fire {firing.transition_id!r}: no available token "
                f"{wanted.canon()} in {arc.place_id!r}"
            )
        bucket.remove(pick)

    stamp = clock + transition.delay
    for arc in net.output_arcs(firing.transition_id):
        value = eval_value(arc.expr, binding, marking)
        for _ in range(arc.count):
            work.setdefault(arc.place_id, []).append(TimedToken(stamp, value))

    return Marking({pid: toks for pid, toks in work.items() if toks})


@dataclass(frozen=True)
class StepResult:
    marking: Marking
    clock: int
    firing: Firing


def next_active_clock(
    net: Net, marking: Marking, clock: int
) -> tuple[int, list[Firing]] | None:
    """First clock at or after `clock` with an enabled firing, or None."""
    while True:
        firings = all_enabled(net, marking, clock)
        if firings:
            return clock, firings
        nxt = marking.earliest_future(clock)
        if nxt is None:
            return None
        clock = nxt


def step(
    net: Net, marking: Marking, clock: int, rng: random.Random
) -> StepResult | None:
    active = next_active_clock(net, marking, clock)
    if active is None:
        return None
    clock, firings = active
    firing = firings[rng.randrange(len(firings))]
    return StepResult(fire(net, marking, clock, firing), clock, firing)


@dataclass(frozen=True)
class TraceEntry:
    clock: int
    transition_id: str
    binding: str


@dataclass(frozen=True)
class Trace:
    entries: tuple[TraceEntry, ...]
    final_marking: Marking
    final_clock: int
    halted: bool

    def to_text(self) -> str:
        lines = [
            f"{e.clock}\t{e.transition_id}\t{e.binding}" for e in self.entries
        ]
        lines.append(f"# clock={self.final_clock} halted={str(self.halted).lower()}")
        lines.append(f"# marking {self.final_marking.canon()}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "entries": [
                {
                    "clock": e.clock,
                    "transition": e.transition_id,
                    "binding": e.binding,
                }
                for e in self.entries
            ],
            "final_clock": self.final_clock,
            "halted": self.halted,
            "final_marking": self.final_marking.to_json(),
        }


def simulate(
    net: Net,
    steps: int,
    seed: int,
    marking: Marking | None = None,
    clock: int = 0,
) -> Trace:
    """Run up to `steps` firings from the initial (or given) marking."""
    current = net.initial if marking is None else marking
    rng = random.Random(seed)
    entries: list[TraceEntry] = []
    halted = False
    for _ in range(steps):
        result = step(net, current, clock, rng)
        if result is None:
            halted = True
            break
        current, clock = result.marking, result.clock
        entries.append(
            TraceEntry(result.clock, result.firing.transition_id, result.firing.canon())
        )
    else:
        halted = next_active_clock(net, current, clock) is None
    return Trace(tuple(entries), current, clock, halted)
