"""High-level Petri net kernel: typed tokens, timed firing, hierarchy."""

from .engine import (
    Firing,
    StepResult,
    Trace,
    TraceEntry,
    all_enabled,
    binding_canon,
    fire,
    next_active_clock,
    simulate,
    step,
    transition_bindings,
)
from .exprs import ExprError, UnboundVariable
from .io import dump_net, dumps_net, load_net, net_from_json, net_to_json
from .net import (
    Fusion,
    InputArc,
    Marking,
    Net,
    NetError,
    OutputArc,
    Place,
    TimedToken,
    Transition,
    flatten,
    validate_net,
)
from .values import TokenValue, ValueError_

__all__ = [
    "Firing",
    "Fusion",
    "ExprError",
    "InputArc",
    "Marking",
    "Net",
    "NetError",
    "OutputArc",
    "Place",
    "StepResult",
    "TimedToken",
    "TokenValue",
    "Trace",
    "TraceEntry",
    "Transition",
    "UnboundVariable",
    "ValueError_",
    "all_enabled",
    "binding_canon",
    "dump_net",
    "dumps_net",
    "fire",
    "flatten",
    "load_net",
    "net_from_json",
    "net_to_json",
    "next_active_clock",
    "simulate",
    "step",
    "transition_bindings",
    "validate_net",
]
