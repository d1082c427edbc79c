"""Threat catalog types, exploit subnets, and attachment to a target net.

A threat is a declarative record: which service it lives in, which place of
the target net it touches, what issue an attacker must find, what action
exploits it, and what consequence follows. ``build_threat_subnet`` turns one
record into a small net that plays out reconnaissance and exploitation;
``attach`` grafts any number of those subnets onto a copy of a target net and
wires their consequences into a shared capability pool so that one threat can
gate another. ``violated_requirements`` scores achieved consequences against
ranked security requirements.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Any, Iterable, Mapping, Sequence

from .hlpn.exprs import BindVar, Cmp, and_, eq, field, in_place, lit, not_, var
from .hlpn.net import Fusion, InputArc, Net, OutputArc, Place, TimedToken, Transition
from .hlpn.values import TextSet, record, record_set, text, value_from_json

CIA_AXES = ("confidentiality", "integrity", "availability")
IMPACT_LEVELS = ("none", "partial", "full")

# Well-known consequence tags; any other string is accepted as a custom tag.
CORE_CONSEQUENCES = (
    "bypass-auth",
    "dos",
    "read-data",
    "modify-config",
    "intercept-traffic",
    "quota-bypass",
    "escalate",
)

EFFECT_KINDS = ("capability", "inject", "mark-dos", "context")
MITIGATION_KINDS = ("remove-link", "disable-threat", "strengthen-guard")


class InvalidThreat(Exception):
    """Raised when a threat, requirement, or catalog entry is malformed."""


class UnresolvedLink(Exception):
    """Raised when attachment references a threat, place, or link that is absent."""


class UnknownMitigation(Exception):
    """Raised when a mitigation name resolves to nothing in the catalog."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise InvalidThreat(message)


@dataclass(frozen=True)
class ThreatDefinition:
    """One catalog entry describing a weakness and its exploitation."""

    id: str
    service: str
    target_place: str
    issue: str
    action: str
    consequence: str
    cia_impact: Mapping[str, str]
    requires: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name in ("id", "service", "target_place", "issue", "action", "consequence"):
            _require(bool(getattr(self, name)), f"threat field {name!r} must be non-empty")
        _require(
            set(self.cia_impact) == set(CIA_AXES),
            f"threat {self.id}: cia_impact must cover exactly {CIA_AXES}",
        )
        for axis, level in self.cia_impact.items():
            _require(
                level in IMPACT_LEVELS,
                f"threat {self.id}: impact level {level!r} not one of {IMPACT_LEVELS}",
            )
        _require(
            any(level != "none" for level in self.cia_impact.values()),
            f"threat {self.id}: at least one axis must be impacted",
        )
        for tag in self.requires:
            _require(
                isinstance(tag, str) and bool(tag),
                f"threat {self.id}: required capability tags must be non-empty strings",
            )

    def consequence_payload(self) -> "Consequence":
        return Consequence(
            self.consequence, dict(self.cia_impact), self.service, self.target_place, self.id
        )

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ThreatDefinition":
        allowed = {
            "id",
            "service",
            "target_place",
            "issue",
            "action",
            "consequence",
            "cia_impact",
            "requires",
        }
        unknown = set(data) - allowed
        _require(not unknown, f"unknown threat keys: {sorted(unknown)}")
        impact = {axis: "none" for axis in CIA_AXES}
        impact.update(data.get("cia_impact", {}))
        return cls(
            id=data.get("id", ""),
            service=data.get("service", ""),
            target_place=data.get("target_place", ""),
            issue=data.get("issue", ""),
            action=data.get("action", ""),
            consequence=data.get("consequence", ""),
            cia_impact=impact,
            requires=tuple(data.get("requires", ())),
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "service": self.service,
            "target_place": self.target_place,
            "issue": self.issue,
            "action": self.action,
            "consequence": self.consequence,
            "cia_impact": {axis: self.cia_impact[axis] for axis in CIA_AXES},
            "requires": list(self.requires),
        }


@dataclass(frozen=True)
class Consequence:
    """An achieved consequence: the tag plus where it happened and how hard it hits."""

    tag: str
    cia_impact: Mapping[str, str]
    service: str
    target_place: str
    threat_id: str


@dataclass(frozen=True)
class SecurityRequirement:
    """A ranked protection goal: an axis, a priority (1 = highest), optional scope."""

    axis: str
    priority: int
    scope: str | None = None

    def __post_init__(self) -> None:
        _require(self.axis in CIA_AXES, f"requirement axis {self.axis!r} not one of {CIA_AXES}")
        _require(self.priority >= 1, "requirement priority must be a positive rank")

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "SecurityRequirement":
        unknown = set(data) - {"axis", "priority", "scope"}
        _require(not unknown, f"unknown requirement keys: {sorted(unknown)}")
        return cls(data.get("axis", ""), data.get("priority", 0), data.get("scope"))

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"axis": self.axis, "priority": self.priority}
        if self.scope is not None:
            out["scope"] = self.scope
        return out


@dataclass(frozen=True)
class LinkEffect:
    """One consequence of a successful exploit on the attached net.

    * ``capability``: drop the consequence tag into the shared CAP pool.
    * ``inject``: place a literal token into a target-net place.
    * ``mark-dos``: record a partial or full denial-of-service mark.
    * ``context``: require (and return) a token from a target-net place,
      gating the link on that token's existence.
    """

    kind: str
    place: str | None = None
    value: Any = None
    level: str | None = None

    def __post_init__(self) -> None:
        _require(self.kind in EFFECT_KINDS, f"unknown effect kind {self.kind!r}")
        if self.kind in ("inject", "context"):
            _require(bool(self.place), f"{self.kind} effect needs a place")
        if self.kind == "inject":
            _require(self.value is not None, "inject effect needs a value")
        if self.kind == "mark-dos":
            _require(self.level in ("partial", "full"), "mark-dos level must be partial or full")

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "LinkEffect":
        unknown = set(data) - {"kind", "place", "value", "level"}
        _require(not unknown, f"unknown effect keys: {sorted(unknown)}")
        return cls(data.get("kind", ""), data.get("place"), data.get("value"), data.get("level"))

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.place is not None:
            out["place"] = self.place
        if self.value is not None:
            out["value"] = self.value
        if self.level is not None:
            out["level"] = self.level
        return out


@dataclass(frozen=True)
class LinkSpec:
    """Wiring for one threat: what its consequence does to the attached net."""

    threat_id: str
    effects: tuple[LinkEffect, ...]

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "LinkSpec":
        unknown = set(data) - {"threat", "effects"}
        _require(not unknown, f"unknown link keys: {sorted(unknown)}")
        effects = tuple(LinkEffect.from_json(e) for e in data.get("effects", ()))
        return cls(data.get("threat", ""), effects)

    def to_json(self) -> dict[str, Any]:
        return {"threat": self.threat_id, "effects": [e.to_json() for e in self.effects]}


@dataclass(frozen=True)
class Mitigation:
    """A resolved countermeasure to apply before analysis."""

    name: str
    kind: str
    consequence: str | None = None
    threat_id: str | None = None
    flag: str | None = None

    def __post_init__(self) -> None:
        _require(self.kind in MITIGATION_KINDS, f"unknown mitigation kind {self.kind!r}")
        if self.kind == "remove-link":
            _require(bool(self.consequence), "remove-link mitigation needs a consequence")
        if self.kind == "disable-threat":
            _require(bool(self.threat_id), "disable-threat mitigation needs a threat id")
        if self.kind == "strengthen-guard":
            _require(bool(self.flag), "strengthen-guard mitigation needs a config flag")

    @classmethod
    def from_json(cls, name: str, data: Mapping[str, Any]) -> "Mitigation":
        unknown = set(data) - {"kind", "consequence", "threat", "flag"}
        _require(not unknown, f"unknown mitigation keys: {sorted(unknown)}")
        return cls(
            name,
            data.get("kind", ""),
            data.get("consequence"),
            data.get("threat"),
            data.get("flag"),
        )

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.consequence is not None:
            out["consequence"] = self.consequence
        if self.threat_id is not None:
            out["threat"] = self.threat_id
        if self.flag is not None:
            out["flag"] = self.flag
        return out


@dataclass
class ThreatCatalog:
    """Every known threat plus its wiring and the named mitigations."""

    threats: dict[str, ThreatDefinition] = dc_field(default_factory=dict)
    links: dict[str, LinkSpec] = dc_field(default_factory=dict)
    mitigations: dict[str, Mitigation] = dc_field(default_factory=dict)

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ThreatCatalog":
        unknown = set(data) - {"schema_version", "threats", "links", "mitigations", "drafts", "audit"}
        _require(not unknown, f"unknown catalog keys: {sorted(unknown)}")
        threats: dict[str, ThreatDefinition] = {}
        for raw in data.get("threats", ()):
            t = ThreatDefinition.from_json(raw)
            _require(t.id not in threats, f"duplicate threat id {t.id!r}")
            threats[t.id] = t
        links: dict[str, LinkSpec] = {}
        for raw in data.get("links", ()):
            spec = LinkSpec.from_json(raw)
            if spec.threat_id not in threats:
                raise UnresolvedLink(f"link references unknown threat {spec.threat_id!r}")
            if spec.threat_id in links:
                raise UnresolvedLink(f"second link for threat {spec.threat_id!r}")
            links[spec.threat_id] = spec
        mitigations = {
            name: Mitigation.from_json(name, raw)
            for name, raw in data.get("mitigations", {}).items()
        }
        return cls(threats, links, mitigations)

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_version": 1,
            "threats": [t.to_json() for t in self.threats.values()],
            "links": [spec.to_json() for spec in self.links.values()],
            "mitigations": {name: m.to_json() for name, m in sorted(self.mitigations.items())},
        }


def load_catalog(path: str) -> ThreatCatalog:
    with open(path, "r", encoding="utf-8") as handle:
        return ThreatCatalog.from_json(json.load(handle))


def resolve_mitigations(names: Iterable[str], catalog: ThreatCatalog) -> list[Mitigation]:
    """Turn mitigation names into actions; ``patch:<id>`` disables that threat."""
    resolved = []
    for name in names:
        if name.startswith("patch:"):
            threat_id = name[len("patch:"):]
            if threat_id not in catalog.threats:
                raise UnknownMitigation(f"cannot patch unknown threat {threat_id!r}")
            resolved.append(Mitigation(name, "disable-threat", threat_id=threat_id))
        elif name in catalog.mitigations:
            resolved.append(catalog.mitigations[name])
        else:
            raise UnknownMitigation(f"no mitigation named {name!r}")
    return resolved


def link_transition_id(threat_id: str) -> str:
    return f"{threat_id}/link"


def threat_of_link(transition_id: str) -> str | None:
    """Inverse of ``link_transition_id``; None for any other transition."""
    if transition_id.endswith("/link"):
        return transition_id[: -len("/link")]
    return None


_THREAT_RECORD = record_set(issue=TextSet(), service=TextSet())


def build_threat_subnet(threat: ThreatDefinition) -> Net:
    """A standalone net playing out one threat's reconnaissance and exploit.

    Reconnaissance (PreCon_S) needs the service description and a matching
    recon result, plus every required capability present in CAP; it exposes
    the issue as an attack surface. A mismatched recon result fails once
    (PreCon_F) and leaves the service alone. Exploitation (Exploit_S) needs
    the exposed issue and the right action; the wrong action is spent without
    effect (Exploit_F) while the surface stays open. Success drops the
    consequence tag into Cons.
    """
    net = Net(threat.id)
    for pid, label in (
        ("Service", "service under scrutiny"),
        ("Rec", "reconnaissance results"),
        ("soft_iss", "confirmed software issues"),
    ):
        net.add_place(Place(pid, _THREAT_RECORD, label=label))
    for pid, label in (
        ("Action", "attacker actions"),
        ("Atk_sur", "exposed attack surface"),
        ("Cons", "achieved consequences"),
        ("CAP", "capabilities granted so far"),
    ):
        net.add_place(Place(pid, TextSet(), label=label))

    recon_ok = and_(
        eq(var("SER"), var("RC")),
        *[in_place(lit(text(tag)), "CAP") for tag in threat.requires],
    )
    net.add_transition(
        Transition("PreCon_S", guard=recon_ok, delay=1, label="reconnaissance confirms issue"),
        inputs=[InputArc("Service", BindVar("SER")), InputArc("Rec", BindVar("RC"))],
        outputs=[
            OutputArc("soft_iss", var("SER")),
            OutputArc("Atk_sur", field(var("SER"), "issue")),
        ],
    )
    net.add_transition(
        Transition(
            "PreCon_F",
            guard=Cmp("ne", var("SER"), var("RC")),
            delay=1,
            label="reconnaissance misses",
        ),
        inputs=[InputArc("Service", BindVar("SER")), InputArc("Rec", BindVar("RC"))],
        outputs=[OutputArc("Service", var("SER"))],
    )

    exploit_ok = and_(eq(field(var("ISS"), "issue"), var("ACT")), eq(var("SUR"), var("ACT")))
    exploit_arcs = [
        InputArc("soft_iss", BindVar("ISS")),
        InputArc("Action", BindVar("ACT")),
        InputArc("Atk_sur", BindVar("SUR")),
    ]
    net.add_transition(
        Transition("Exploit_S", guard=exploit_ok, delay=1, label="exploit succeeds"),
        inputs=list(exploit_arcs),
        outputs=[OutputArc("Cons", lit(text(threat.consequence)))],
    )
    net.add_transition(
        Transition("Exploit_F", guard=not_(exploit_ok), delay=1, label="exploit fizzles"),
        inputs=list(exploit_arcs),
        outputs=[OutputArc("soft_iss", var("ISS")), OutputArc("Atk_sur", var("SUR"))],
    )

    probe = record(service=text(threat.service), issue=text(threat.issue))
    net.initial = net.initial.with_changes(
        add=[
            ("Service", TimedToken(0, probe)),
            ("Rec", TimedToken(0, probe)),
            ("Action", TimedToken(0, text(threat.action))),
        ]
    )
    return net


def attach(
    target: Net,
    threats: Sequence[ThreatDefinition],
    links: Sequence[LinkSpec],
) -> Net:
    """Graft threat subnets (and their consequence wiring) onto a copy of a net.

    The result gains a shared CAP place (capability tags), a DOS place
    (denial-of-service marks), and per threat a Cons place plus a link
    transition that consumes the achieved consequence and applies the link's
    effects. The original net is never modified.
    """
    from .hlpn.io import net_from_json, net_to_json

    ids = [t.id for t in threats]
    if len(set(ids)) != len(ids):
        raise UnresolvedLink("duplicate threat ids in attachment")
    by_threat: dict[str, LinkSpec] = {}
    for spec in links:
        if spec.threat_id not in set(ids):
            raise UnresolvedLink(f"link references unattached threat {spec.threat_id!r}")
        if spec.threat_id in by_threat:
            raise UnresolvedLink(f"second link for threat {spec.threat_id!r}")
        by_threat[spec.threat_id] = spec

    known = dict(target.places)
    for t in threats:
        if t.target_place not in known:
            raise UnresolvedLink(
                f"threat {t.id}: target place {t.target_place!r} not in net {target.net_id!r}"
            )

    net = net_from_json(net_to_json(target))
    net.add_place(Place("CAP", TextSet(), label="granted capabilities"))
    net.add_place(
        Place("DOS", record_set(level=TextSet(), threat=TextSet()), label="denial-of-service marks")
    )

    for t in threats:
        cons_id = f"{t.id}/Cons"
        net.add_place(Place(cons_id, TextSet(), label=f"{t.id} consequence"))
        net.add_submodule(
            t.id,
            build_threat_subnet(t),
            [Fusion(cons_id, t.id, "Cons"), Fusion("CAP", t.id, "CAP")],
        )
        spec = by_threat.get(t.id)
        if spec is None:
            continue
        inputs = [InputArc(cons_id, BindVar("CONS"))]
        outputs = []
        context_count = 0
        for effect in spec.effects:
            if effect.kind == "capability":
                outputs.append(OutputArc("CAP", var("CONS")))
            elif effect.kind == "inject":
                if effect.place not in known:
                    raise UnresolvedLink(
                        f"threat {t.id}: inject place {effect.place!r} not in net"
                    )
                value = value_from_json(effect.value)
                if not known[effect.place].colorset.contains(value):
                    raise UnresolvedLink(
                        f"threat {t.id}: inject value does not fit place {effect.place!r}"
                    )
                outputs.append(OutputArc(effect.place, lit(value)))
            elif effect.kind == "mark-dos":
                mark = record(level=text(effect.level), threat=text(t.id))
                outputs.append(OutputArc("DOS", lit(mark)))
            else:
                if effect.place not in known:
                    raise UnresolvedLink(
                        f"threat {t.id}: context place {effect.place!r} not in net"
                    )
                name = f"CTX{context_count}"
                context_count += 1
                inputs.append(InputArc(effect.place, BindVar(name)))
                outputs.append(OutputArc(effect.place, var(name)))
        net.add_transition(
            Transition(link_transition_id(t.id), delay=1, label=f"{t.id} takes effect"),
            inputs=inputs,
            outputs=outputs,
        )
    return net


def violated_requirements(
    consequences: Iterable[Consequence],
    requirements: Iterable[SecurityRequirement],
) -> list[tuple[SecurityRequirement, bool]]:
    """Score achieved consequences against ranked requirements.

    Returns the violated requirements ordered by priority, each paired with a
    flag that is True when only partial impacts hit that axis. A requirement
    with a scope only counts consequences whose service or target place
    matches the scope.
    """
    records = list(consequences)
    result = []
    for req in sorted(requirements, key=lambda r: r.priority):
        levels = [
            rec.cia_impact.get(req.axis, "none")
            for rec in records
            if req.scope is None or req.scope in (rec.service, rec.target_place)
        ]
        if any(level == "full" for level in levels):
            result.append((req, False))
        elif any(level == "partial" for level in levels):
            result.append((req, True))
    return result
