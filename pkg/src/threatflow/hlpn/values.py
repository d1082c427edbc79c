"""Typed token values and color sets for high-level Petri nets.

Token values are immutable and structurally comparable; structural equality
is what drives marking deduplication during state-space exploration. Every
value has a canonical string form (`canon`) used for deterministic ordering
and for binding digests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable


class ValueError_(Exception):
    """Raised when a token value or color set is constructed inconsistently."""


# ---------------------------------------------------------------------------
# Token values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TokenValue:
    """Base class for token data carried through the net."""

    def canon(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Text(TokenValue):
    value: str

    def canon(self) -> str:
        return "s" + json.dumps(self.value, ensure_ascii=True)


@dataclass(frozen=True)
class Count(TokenValue):
    value: int

    def __post_init__(self) -> None:
        if isinstance(self.value, bool) or not isinstance(self.value, int):
            raise ValueError_(f"Count requires an int, got {self.value!r}")

    def canon(self) -> str:
        return f"i{self.value}"


@dataclass(frozen=True)
class Record(TokenValue):
    """Record with unique field names; entries normalize to name-sorted order."""

    entries: tuple[tuple[str, TokenValue], ...]

    def __post_init__(self) -> None:
        names = [name for name, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError_(f"duplicate record fields: {names}")
        ordered = tuple(sorted(self.entries, key=lambda e: e[0]))
        object.__setattr__(self, "entries", ordered)

    def get(self, name: str) -> TokenValue:
        for field_name, value in self.entries:
            if field_name == name:
                return value
        raise ValueError_(f"record has no field {name!r}")

    def field_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    def canon(self) -> str:
        inner = ",".join(f"{name}={value.canon()}" for name, value in self.entries)
        return "r{" + inner + "}"


@dataclass(frozen=True)
class Row(TokenValue):
    """Ordered tuple of token values (fixed or variable arity)."""

    items: tuple[TokenValue, ...]

    def canon(self) -> str:
        return "t(" + ",".join(item.canon() for item in self.items) + ")"


def text(value: str) -> Text:
    return Text(value)


def count(value: int) -> Count:
    return Count(value)


def record(**fields: TokenValue) -> Record:
    return Record(tuple(fields.items()))


def row(*items: TokenValue) -> Row:
    return Row(tuple(items))


def value_sort_key(value: TokenValue) -> str:
    return value.canon()


# ---------------------------------------------------------------------------
# JSON encoding of values
# ---------------------------------------------------------------------------

# Strings become Text, integers Count, objects Record, arrays Row. Booleans
# and floats are not token data and are rejected.


def value_to_json(value: TokenValue) -> Any:
    if isinstance(value, Text):
        return value.value
    if isinstance(value, Count):
        return value.value
    if isinstance(value, Record):
        return {name: value_to_json(v) for name, v in value.entries}
    if isinstance(value, Row):
        return [value_to_json(item) for item in value.items]
    raise ValueError_(f"unknown token value {value!r}")


def value_from_json(data: Any) -> TokenValue:
    if isinstance(data, str):
        return Text(data)
    if isinstance(data, bool):
        raise ValueError_(f"booleans are not token values: {data!r}")
    if isinstance(data, int):
        return Count(data)
    if isinstance(data, dict):
        return Record(tuple((name, value_from_json(v)) for name, v in data.items()))
    if isinstance(data, list):
        return Row(tuple(value_from_json(item) for item in data))
    raise ValueError_(f"cannot decode token value from {data!r}")


# ---------------------------------------------------------------------------
# Color sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColorSet:
    """Type descriptor for the values a place may hold."""

    def contains(self, value: TokenValue) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class TextSet(ColorSet):
    def contains(self, value: TokenValue) -> bool:
        return isinstance(value, Text)


@dataclass(frozen=True)
class CountSet(ColorSet):
    def contains(self, value: TokenValue) -> bool:
        return isinstance(value, Count)


@dataclass(frozen=True)
class AnySet(ColorSet):
    def contains(self, value: TokenValue) -> bool:
        return isinstance(value, TokenValue)


@dataclass(frozen=True)
class RecordSet(ColorSet):
    fields: tuple[tuple[str, ColorSet], ...]

    def __post_init__(self) -> None:
        names = [name for name, _ in self.fields]
        if len(set(names)) != len(names):
            raise ValueError_(f"duplicate record-set fields: {names}")
        ordered = tuple(sorted(self.fields, key=lambda e: e[0]))
        object.__setattr__(self, "fields", ordered)

    def contains(self, value: TokenValue) -> bool:
        if not isinstance(value, Record):
            return False
        if value.field_names() != tuple(name for name, _ in self.fields):
            return False
        return all(cs.contains(value.get(name)) for name, cs in self.fields)

    def field_set(self, name: str) -> ColorSet:
        for field_name, cs in self.fields:
            if field_name == name:
                return cs
        raise ValueError_(f"record set has no field {name!r}")


@dataclass(frozen=True)
class RowSet(ColorSet):
    """Fixed-arity tuple type."""

    items: tuple[ColorSet, ...]

    def contains(self, value: TokenValue) -> bool:
        if not isinstance(value, Row) or len(value.items) != len(self.items):
            return False
        return all(cs.contains(item) for cs, item in zip(self.items, value.items))


@dataclass(frozen=True)
class ListSet(ColorSet):
    """Variable-arity tuple whose items share one type."""

    element: ColorSet

    def contains(self, value: TokenValue) -> bool:
        if not isinstance(value, Row):
            return False
        return all(self.element.contains(item) for item in value.items)


def record_set(**fields: ColorSet) -> RecordSet:
    return RecordSet(tuple(fields.items()))


def row_set(*items: ColorSet) -> RowSet:
    return RowSet(tuple(items))


def colorset_to_json(cs: ColorSet) -> Any:
    if isinstance(cs, TextSet):
        return "text"
    if isinstance(cs, CountSet):
        return "count"
    if isinstance(cs, AnySet):
        return "any"
    if isinstance(cs, RecordSet):
        return {"record": {name: colorset_to_json(f) for name, f in cs.fields}}
    if isinstance(cs, RowSet):
        return {"tuple": [colorset_to_json(item) for item in cs.items]}
    if isinstance(cs, ListSet):
        return {"list": colorset_to_json(cs.element)}
    raise ValueError_(f"unknown color set {cs!r}")


def colorset_from_json(data: Any) -> ColorSet:
    if data == "text":
        return TextSet()
    if data == "count":
        return CountSet()
    if data == "any":
        return AnySet()
    if isinstance(data, dict) and len(data) == 1:
        kind, body = next(iter(data.items()))
        if kind == "record":
            return RecordSet(
                tuple((name, colorset_from_json(f)) for name, f in body.items())
            )
        if kind == "tuple":
            return RowSet(tuple(colorset_from_json(item) for item in body))
        if kind == "list":
            return ListSet(colorset_from_json(body))
    raise ValueError_(f"cannot decode color set from {data!r}")


def typecheck_tokens(cs: ColorSet, values: Iterable[TokenValue]) -> list[TokenValue]:
    """Return the values that violate the color set."""
    return [v for v in values if not cs.contains(v)]
