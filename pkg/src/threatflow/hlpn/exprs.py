"""Closed expression language for transition guards and arc inscriptions.

Expressions serialize as S-expression-like nested JSON arrays. The grammar is
deliberately small: variables, literals, field access, comparisons, membership
tests against a place's current tokens, boolean connectives, and constructors
(tuple, record, concatenation). Input arcs use patterns instead: bind a whole
token, match a literal, or destructure a record/tuple completely so that a
binding always reconstructs the consumed token uniquely.

Grammar (JSON arrays; `E` is an expression, `V` a variable name, `P` a place id):

    ["var", V]                      bound variable
    ["lit", <json value>]           literal token value
    ["field", E, name]              record field access
    ["eq"|"ne"|"lt"|"le"|"gt"|"ge", E, E]
    ["in"|"not-in", E, P]           membership among P's current token values
    ["min", P]                      least token value currently in P
                                    (canonical order; error when P is empty)
    ["and"|"or", E, ...]            n-ary connectives
    ["not", E]
    ["tuple", E, ...]               tuple constructor
    ["record", name, E, ...]        record constructor (alternating pairs)
    ["concat", E, ...]              tuple concatenation; tuple operands splice,
                                    other operands append as single items
    true | false                    constant guards

Patterns:

    ["bind", V]                     bind the whole token
    ["match", <json value>]         token must equal the literal
    ["fields", name, V, ...]        destructure a record (all fields required)
    ["parts", V, ...]               destructure a tuple (exact arity)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from .values import (
    Count,
    Record,
    Row,
    Text,
    TokenValue,
    value_from_json,
    value_to_json,
)


class ExprError(Exception):
    """Raised on malformed expressions or ill-typed evaluation."""


class UnboundVariable(ExprError):
    pass


TRUE_ = ("lit-true",)


# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Lit(Expr):
    value: TokenValue


@dataclass(frozen=True)
class Field(Expr):
    base: Expr
    name: str


@dataclass(frozen=True)
class Cmp(Expr):
    op: str  # eq ne lt le gt ge
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Member(Expr):
    op: str  # in | not-in
    item: Expr
    place_id: str


@dataclass(frozen=True)
class MinOf(Expr):
    place_id: str


@dataclass(frozen=True)
class BoolOp(Expr):
    op: str  # and | or
    operands: tuple[Expr, ...]


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


@dataclass(frozen=True)
class MakeRow(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class MakeRecord(Expr):
    entries: tuple[tuple[str, Expr], ...]


@dataclass(frozen=True)
class Concat(Expr):
    operands: tuple[Expr, ...]


@dataclass(frozen=True)
class Const(Expr):
    value: bool


TRUE = Const(True)
FALSE = Const(False)

_CMP_OPS = ("eq", "ne", "lt", "le", "gt", "ge")


# ---------------------------------------------------------------------------
# Patterns (input arcs)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pattern:
    pass


@dataclass(frozen=True)
class BindVar(Pattern):
    name: str


@dataclass(frozen=True)
class MatchLit(Pattern):
    value: TokenValue


@dataclass(frozen=True)
class FieldsPattern(Pattern):
    """Destructure a record completely: one variable per field."""

    entries: tuple[tuple[str, str], ...]  # (field name, variable name)


@dataclass(frozen=True)
class PartsPattern(Pattern):
    """Destructure a tuple positionally with exact arity."""

    names: tuple[str, ...]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


class PlaceView:
    """Read access to the token values currently in each place.

    Guards see values only; timestamps affect consumption, not reads.
    """

    def values_in(self, place_id: str) -> set[TokenValue]:
        raise NotImplementedError


class EmptyView(PlaceView):
    def values_in(self, place_id: str) -> set[TokenValue]:
        return set()


def _compare(op: str, left: TokenValue, right: TokenValue) -> bool:
    if op == "eq":
        return left == right
    if op == "ne":
        return left != right
    if isinstance(left, Count) and isinstance(right, Count):
        a, b = left.value, right.value
    elif isinstance(left, Text) and isinstance(right, Text):
        a, b = left.value, right.value
    else:
        raise ExprError(f"cannot order {left!r} against {right!r}")
    if op == "lt":
        return a < b
    if op == "le":
        return a <= b
    if op == "gt":
        return a > b
    if op == "ge":
        return a >= b
    raise ExprError(f"unknown comparison {op!r}")


def eval_expr(
    expr: Expr, binding: Mapping[str, TokenValue], view: PlaceView
) -> TokenValue | bool:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        if expr.name not in binding:
            raise UnboundVariable(expr.name)
        return binding[expr.name]
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Field):
        base = _as_value(eval_expr(expr.base, binding, view))
        if not isinstance(base, Record):
            raise ExprError(f"field access on non-record {base!r}")
        return base.get(expr.name)
    if isinstance(expr, Cmp):
        left = _as_value(eval_expr(expr.left, binding, view))
        right = _as_value(eval_expr(expr.right, binding, view))
        return _compare(expr.op, left, right)
    if isinstance(expr, Member):
        item = _as_value(eval_expr(expr.item, binding, view))
        present = item in view.values_in(expr.place_id)
        return present if expr.op == "in" else not present
    if isinstance(expr, MinOf):
        values = view.values_in(expr.place_id)
        if not values:
            raise ExprError(f"min over empty place {expr.place_id!r}")
        return min(values, key=lambda v: v.canon())
    if isinstance(expr, BoolOp):
        results = [_as_bool(eval_expr(op, binding, view)) for op in expr.operands]
        return all(results) if expr.op == "and" else any(results)
    if isinstance(expr, Not):
        return not _as_bool(eval_expr(expr.operand, binding, view))
    if isinstance(expr, MakeRow):
        return Row(tuple(_as_value(eval_expr(e, binding, view)) for e in expr.items))
    if isinstance(expr, MakeRecord):
        return Record(
            tuple(
                (name, _as_value(eval_expr(e, binding, view)))
                for name, e in expr.entries
            )
        )
    if isinstance(expr, Concat):
        items: list[TokenValue] = []
        for operand in expr.operands:
            value = _as_value(eval_expr(operand, binding, view))
            if isinstance(value, Row):
                items.extend(value.items)
            else:
                items.append(value)
        return Row(tuple(items))
    raise ExprError(f"unknown expression {expr!r}")


def _as_value(result: TokenValue | bool) -> TokenValue:
    if isinstance(result, bool):
        raise ExprError("boolean used where a token value is required")
    return result


def _as_bool(result: TokenValue | bool) -> bool:
    if not isinstance(result, bool):
        raise ExprError(f"token value {result!r} used where a guard is required")
    return result


def eval_guard(
    expr: Expr, binding: Mapping[str, TokenValue], view: PlaceView
) -> bool:
    return _as_bool(eval_expr(expr, binding, view))


def eval_value(
    expr: Expr, binding: Mapping[str, TokenValue], view: PlaceView
) -> TokenValue:
    return _as_value(eval_expr(expr, binding, view))


# ---------------------------------------------------------------------------
# Pattern matching
# ---------------------------------------------------------------------------


def match_pattern(
    pattern: Pattern, token: TokenValue
) -> dict[str, TokenValue] | None:
    """Match one token, returning the variables bound (None on mismatch)."""
    if isinstance(pattern, BindVar):
        return {pattern.name: token}
    if isinstance(pattern, MatchLit):
        return {} if token == pattern.value else None
    if isinstance(pattern, FieldsPattern):
        if not isinstance(token, Record):
            return None
        wanted = tuple(sorted(name for name, _ in pattern.entries))
        if token.field_names() != wanted:
            return None
        return {var: token.get(name) for name, var in pattern.entries}
    if isinstance(pattern, PartsPattern):
        if not isinstance(token, Row) or len(token.items) != len(pattern.names):
            return None
        return dict(zip(pattern.names, token.items))
    raise ExprError(f"unknown pattern {pattern!r}")


def pattern_token(
    pattern: Pattern, binding: Mapping[str, TokenValue]
) -> TokenValue:
    """Reconstruct the token a pattern consumed from the binding."""
    if isinstance(pattern, BindVar):
        if pattern.name not in binding:
            raise UnboundVariable(pattern.name)
        return binding[pattern.name]
    if isinstance(pattern, MatchLit):
        return pattern.value
    if isinstance(pattern, FieldsPattern):
        return Record(tuple((name, binding[var]) for name, var in pattern.entries))
    if isinstance(pattern, PartsPattern):
        return Row(tuple(binding[name] for name in pattern.names))
    raise ExprError(f"unknown pattern {pattern!r}")


def pattern_vars(pattern: Pattern) -> tuple[str, ...]:
    if isinstance(pattern, BindVar):
        return (pattern.name,)
    if isinstance(pattern, MatchLit):
        return ()
    if isinstance(pattern, FieldsPattern):
        return tuple(var for _, var in pattern.entries)
    if isinstance(pattern, PartsPattern):
        return pattern.names
    raise ExprError(f"unknown pattern {pattern!r}")


def free_vars(expr: Expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, (Lit, Const, MinOf)):
        return set()
    if isinstance(expr, Field):
        return free_vars(expr.base)
    if isinstance(expr, Cmp):
        return free_vars(expr.left) | free_vars(expr.right)
    if isinstance(expr, Member):
        return free_vars(expr.item)
    if isinstance(expr, BoolOp):
        out: set[str] = set()
        for operand in expr.operands:
            out |= free_vars(operand)
        return out
    if isinstance(expr, Not):
        return free_vars(expr.operand)
    if isinstance(expr, MakeRow):
        out = set()
        for item in expr.items:
            out |= free_vars(item)
        return out
    if isinstance(expr, MakeRecord):
        out = set()
        for _, item in expr.entries:
            out |= free_vars(item)
        return out
    if isinstance(expr, Concat):
        out = set()
        for operand in expr.operands:
            out |= free_vars(operand)
        return out
    raise ExprError(f"unknown expression {expr!r}")


def member_places(expr: Expr, negated: bool = False) -> set[tuple[str, bool]]:
    """Collect (place id, read-under-negation) pairs for membership tests."""
    if isinstance(expr, Member):
        effective = negated if expr.op == "in" else not negated
        return {(expr.place_id, effective)}
    if isinstance(expr, MinOf):
        return {(expr.place_id, negated)}
    if isinstance(expr, Not):
        return member_places(expr.operand, not negated)
    if isinstance(expr, BoolOp):
        out: set[tuple[str, bool]] = set()
        for operand in expr.operands:
            out |= member_places(operand, negated)
        return out
    if isinstance(expr, Cmp):
        return member_places(expr.left, negated) | member_places(expr.right, negated)
    if isinstance(expr, Field):
        return member_places(expr.base, negated)
    if isinstance(expr, (MakeRow, Concat)):
        out = set()
        for operand in getattr(expr, "items", getattr(expr, "operands", ())):
            out |= member_places(operand, negated)
        return out
    if isinstance(expr, MakeRecord):
        out = set()
        for _, operand in expr.entries:
            out |= member_places(operand, negated)
        return out
    return set()


def rewrite_member_places(expr: Expr, mapping: Mapping[str, str]) -> Expr:
    """Rename the place ids referenced by membership tests."""
    if isinstance(expr, Member):
        return Member(expr.op, rewrite_member_places(expr.item, mapping),
                      mapping.get(expr.place_id, expr.place_id))
    if isinstance(expr, MinOf):
        return MinOf(mapping.get(expr.place_id, expr.place_id))
    if isinstance(expr, Not):
        return Not(rewrite_member_places(expr.operand, mapping))
    if isinstance(expr, BoolOp):
        return BoolOp(expr.op, tuple(rewrite_member_places(o, mapping)
                                     for o in expr.operands))
    if isinstance(expr, Cmp):
        return Cmp(expr.op, rewrite_member_places(expr.left, mapping),
                   rewrite_member_places(expr.right, mapping))
    if isinstance(expr, Field):
        return Field(rewrite_member_places(expr.base, mapping), expr.name)
    if isinstance(expr, MakeRow):
        return MakeRow(tuple(rewrite_member_places(i, mapping) for i in expr.items))
    if isinstance(expr, MakeRecord):
        return MakeRecord(tuple((n, rewrite_member_places(e, mapping))
                                for n, e in expr.entries))
    if isinstance(expr, Concat):
        return Concat(tuple(rewrite_member_places(o, mapping)
                            for o in expr.operands))
    return expr


# ---------------------------------------------------------------------------
# S-expression serialization
# ---------------------------------------------------------------------------


def expr_to_sexpr(expr: Expr) -> Any:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        return ["var", expr.name]
    if isinstance(expr, Lit):
        return ["lit", value_to_json(expr.value)]
    if isinstance(expr, Field):
        return ["field", expr_to_sexpr(expr.base), expr.name]
    if isinstance(expr, Cmp):
        return [expr.op, expr_to_sexpr(expr.left), expr_to_sexpr(expr.right)]
    if isinstance(expr, Member):
        return [expr.op, expr_to_sexpr(expr.item), expr.place_id]
    if isinstance(expr, MinOf):
        return ["min", expr.place_id]
    if isinstance(expr, BoolOp):
        return [expr.op, *[expr_to_sexpr(op) for op in expr.operands]]
    if isinstance(expr, Not):
        return ["not", expr_to_sexpr(expr.operand)]
    if isinstance(expr, MakeRow):
        return ["tuple", *[expr_to_sexpr(item) for item in expr.items]]
    if isinstance(expr, MakeRecord):
        out: list[Any] = ["record"]
        for name, item in expr.entries:
            out.append(name)
            out.append(expr_to_sexpr(item))
        return out
    if isinstance(expr, Concat):
        return ["concat", *[expr_to_sexpr(op) for op in expr.operands]]
    raise ExprError(f"unknown expression {expr!r}")


def expr_from_sexpr(data: Any) -> Expr:
    if isinstance(data, bool):
        return Const(data)
    if not isinstance(data, list) or not data:
        raise ExprError(f"malformed expression {data!r}")
    head = data[0]
    args = data[1:]
    if head == "var":
        _arity(data, 1)
        return Var(_name(args[0]))
    if head == "lit":
        _arity(data, 1)
        return Lit(value_from_json(args[0]))
    if head == "field":
        _arity(data, 2)
        return Field(expr_from_sexpr(args[0]), _name(args[1]))
    if head in _CMP_OPS:
        _arity(data, 2)
        return Cmp(head, expr_from_sexpr(args[0]), expr_from_sexpr(args[1]))
    if head in ("in", "not-in"):
        _arity(data, 2)
        return Member(head, expr_from_sexpr(args[0]), _name(args[1]))
    if head == "min":
        _arity(data, 1)
        return MinOf(_name(args[0]))
    if head in ("and", "or"):
        if not args:
            raise ExprError(f"{head} needs at least one operand")
        return BoolOp(head, tuple(expr_from_sexpr(a) for a in args))
    if head == "not":
        _arity(data, 1)
        return Not(expr_from_sexpr(args[0]))
    if head == "tuple":
        return MakeRow(tuple(expr_from_sexpr(a) for a in args))
    if head == "record":
        if len(args) % 2 != 0:
            raise ExprError("record constructor needs name/expression pairs")
        entries = tuple(
            (_name(args[i]), expr_from_sexpr(args[i + 1]))
            for i in range(0, len(args), 2)
        )
        return MakeRecord(entries)
    if head == "concat":
        return Concat(tuple(expr_from_sexpr(a) for a in args))
    raise ExprError(f"unknown expression head {head!r}")


def pattern_to_sexpr(pattern: Pattern) -> Any:
    if isinstance(pattern, BindVar):
        return ["bind", pattern.name]
    if isinstance(pattern, MatchLit):
        return ["match", value_to_json(pattern.value)]
    if isinstance(pattern, FieldsPattern):
        out: list[Any] = ["fields"]
        for name, var in pattern.entries:
            out.append(name)
            out.append(var)
        return out
    if isinstance(pattern, PartsPattern):
        return ["parts", *pattern.names]
    raise ExprError(f"unknown pattern {pattern!r}")


def pattern_from_sexpr(data: Any) -> Pattern:
    if not isinstance(data, list) or not data:
        raise ExprError(f"malformed pattern {data!r}")
    head = data[0]
    args = data[1:]
    if head == "bind":
        _arity(data, 1)
        return BindVar(_name(args[0]))
    if head == "match":
        _arity(data, 1)
        return MatchLit(value_from_json(args[0]))
    if head == "fields":
        if len(args) % 2 != 0:
            raise ExprError("fields pattern needs name/variable pairs")
        entries = tuple(
            (_name(args[i]), _name(args[i + 1])) for i in range(0, len(args), 2)
        )
        seen = [var for _, var in entries]
        if len(set(seen)) != len(seen):
            raise ExprError(f"pattern binds a variable twice: {seen}")
        return FieldsPattern(entries)
    if head == "parts":
        names = tuple(_name(a) for a in args)
        if len(set(names)) != len(names):
            raise ExprError(f"pattern binds a variable twice: {names}")
        return PartsPattern(names)
    raise ExprError(f"unknown pattern head {head!r}")


def _arity(data: list, n: int) -> None:
    if len(data) != n + 1:
        raise ExprError(f"{data[0]!r} expects {n} arguments, got {len(data) - 1}")


def _name(value: Any) -> str:
    if not isinstance(value, str) or not value:
        raise ExprError(f"expected a name, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# Convenience constructors (used by the net builders)
# ---------------------------------------------------------------------------


def var(name: str) -> Var:
    return Var(name)


def lit(value: TokenValue) -> Lit:
    return Lit(value)


def field(base: Expr, name: str) -> Field:
    return Field(base, name)


def eq(left: Expr, right: Expr) -> Cmp:
    return Cmp("eq", left, right)


def le(left: Expr, right: Expr) -> Cmp:
    return Cmp("le", left, right)


def in_place(item: Expr, place_id: str) -> Member:
    return Member("in", item, place_id)


def not_in_place(item: Expr, place_id: str) -> Member:
    return Member("not-in", item, place_id)


def min_of(place_id: str) -> MinOf:
    return MinOf(place_id)


def and_(*operands: Expr) -> Expr:
    return operands[0] if len(operands) == 1 else BoolOp("and", tuple(operands))


def or_(*operands: Expr) -> Expr:
    return operands[0] if len(operands) == 1 else BoolOp("or", tuple(operands))


def not_(operand: Expr) -> Not:
    return Not(operand)
