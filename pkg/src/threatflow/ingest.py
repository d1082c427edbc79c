"""Vulnerability-feed import and the file-backed threat catalog.

``import_records`` reads the public CVE JSON feed shape (item list under
``CVE_Items``, CVSS v3 preferred over v2) and produces draft threats: id,
issue text, and mapped impact levels, with everything a human still has to
supply listed in ``missing``. Impacts are never invented; an absent axis
becomes ``none`` and is flagged. ``annotate`` turns a draft into a full
threat definition bound to a place of the cloud model.

The store file is one human-diffable JSON document holding finished
threats, pending drafts, link wiring, mitigations, and an append-only audit
trail; saving is canonical (sorted keys, sorted entries), so loading and
saving a canonical file reproduces it byte for byte.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .cloud import cloud_place_ids
from .threats import (
    CIA_AXES,
    LinkSpec,
    Mitigation,
    ThreatCatalog,
    ThreatDefinition,
)

CVE_ID_GRAMMAR = re.compile(r"CVE-\d{4}-\d{4,}")

_IMPACT_WORDS = {
    "COMPLETE": "full",
    "HIGH": "full",
    "PARTIAL": "partial",
    "LOW": "partial",
    "NONE": "none",
}


class IngestError(Exception):
    """Raised when a feed or store file cannot be read as a whole."""


class UnknownId(Exception):
    """Raised when annotating an id the store has never seen."""


class UnknownPlace(Exception):
    """Raised when an annotation targets a place absent from the cloud model."""


@dataclass(frozen=True)
class MalformedRecord:
    """One rejected feed entry; import continues past it."""

    id: str
    reason: str


@dataclass(frozen=True)
class RawVulnRecord:
    """A feed entry reduced to the fields this pipeline uses."""

    id: str
    description: str
    impacts: Mapping[str, str]
    products: tuple[str, ...] = ()

    def to_draft(self) -> "DraftThreat":
        cia = {axis: self.impacts.get(axis, "none") for axis in CIA_AXES}
        missing = ("target_place", "action", "consequence") + tuple(
            f"impact:{axis}" for axis in CIA_AXES if axis not in self.impacts
        )
        return DraftThreat(
            id=self.id,
            issue=self.description,
            cia_impact=cia,
            products=self.products,
            missing=missing,
        )


@dataclass(frozen=True)
class DraftThreat:
    """An imported threat awaiting manual annotation."""

    id: str
    issue: str
    cia_impact: Mapping[str, str]
    products: tuple[str, ...]
    missing: tuple[str, ...]

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "DraftThreat":
        unknown = set(data) - {"id", "issue", "cia_impact", "products", "missing"}
        if unknown:
            raise IngestError(f"unknown draft keys: {sorted(unknown)}")
        return cls(
            id=data["id"],
            issue=data["issue"],
            cia_impact=dict(data["cia_impact"]),
            products=tuple(data.get("products", ())),
            missing=tuple(data["missing"]),
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "issue": self.issue,
            "cia_impact": dict(self.cia_impact),
            "products": list(self.products),
            "missing": list(self.missing),
        }


@dataclass
class ImportResult:
    drafts: list[DraftThreat]
    errors: list[MalformedRecord]


def _parse_item(item: Mapping[str, Any]) -> RawVulnRecord | MalformedRecord:
    cve = item.get("cve") or {}
    meta = cve.get("CVE_data_meta") or {}
    cve_id = meta.get("ID", "")
    if not isinstance(cve_id, str) or not CVE_ID_GRAMMAR.fullmatch(cve_id):
        return MalformedRecord(str(cve_id), f"id {cve_id!r} does not match the CVE grammar")

    entries = (cve.get("description") or {}).get("description_data") or []
    english = [e for e in entries if e.get("lang") == "en"] or entries
    description = english[0].get("value", "") if english else ""
    if not description:
        return MalformedRecord(cve_id, "record has no description")

    impact = item.get("impact") or {}
    if "baseMetricV3" in impact:
        metrics = impact["baseMetricV3"].get("cvssV3") or {}
    elif "baseMetricV2" in impact:
        metrics = impact["baseMetricV2"].get("cvssV2") or {}
    else:
        metrics = {}
    impacts: dict[str, str] = {}
    for axis in CIA_AXES:
        raw = metrics.get(f"{axis}Impact")
        if raw is None:
            continue
        level = _IMPACT_WORDS.get(str(raw).upper())
        if level is None:
            return MalformedRecord(cve_id, f"unmapped {axis} impact {raw!r}")
        impacts[axis] = level

    products: list[str] = []
    vendor_data = ((cve.get("affects") or {}).get("vendor") or {}).get(
        "vendor_data"
    ) or []
    for vendor in vendor_data:
        product_data = (vendor.get("product") or {}).get("product_data") or []
        for product in product_data:
            name = product.get("product_name")
            if name:
                products.append(name)

    return RawVulnRecord(cve_id, description, impacts, tuple(products))


def import_records(path: str) -> ImportResult:
    """Parse a feed file into drafts, collecting per-record failures."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot read feed {path!r}: {exc}") from exc
    items = data.get("CVE_Items") if isinstance(data, Mapping) else None
    if not isinstance(items, list):
        raise IngestError(f"feed {path!r} has no CVE_Items list")

    drafts: list[DraftThreat] = []
    errors: list[MalformedRecord] = []
    seen: set[str] = set()
    for item in items:
        parsed = _parse_item(item)
        if isinstance(parsed, MalformedRecord):
            errors.append(parsed)
            continue
        if parsed.id in seen:
            errors.append(MalformedRecord(parsed.id, f"duplicate id {parsed.id!r}"))
            continue
        seen.add(parsed.id)
        drafts.append(parsed.to_draft())
    return ImportResult(drafts, errors)


def default_catalog_path() -> str:
    return os.environ.get("THREATFLOW_CATALOG") or "catalog/threats.json"


class CatalogStore:
    """One catalog file: finished threats, drafts, wiring, audit trail."""

    def __init__(self, path: str, places: Iterable[str] | None = None):
        self.path = path
        self.places = frozenset(places) if places is not None else cloud_place_ids()
        self.threats: dict[str, ThreatDefinition] = {}
        self.links: dict[str, LinkSpec] = {}
        self.mitigations: dict[str, Mitigation] = {}
        self.drafts: dict[str, DraftThreat] = {}
        self.audit: list[dict[str, Any]] = []
        if os.path.exists(path):
            self._load()

    def _load(self) -> None:
        try:
            with open(self.path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise IngestError(f"cannot read catalog {self.path!r}: {exc}") from exc
        catalog = ThreatCatalog.from_json(data)
        self.threats = dict(catalog.threats)
        self.links = dict(catalog.links)
        self.mitigations = dict(catalog.mitigations)
        for entry in data.get("drafts", ()):
            draft = DraftThreat.from_json(entry)
            if draft.id in self.drafts or draft.id in self.threats:
                raise IngestError(f"catalog lists {draft.id!r} twice")
            self.drafts[draft.id] = draft
        self.audit = [dict(entry) for entry in data.get("audit", ())]

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_version": 1,
            "threats": [
                self.threats[tid].to_json() for tid in sorted(self.threats)
            ],
            "links": [self.links[tid].to_json() for tid in sorted(self.links)],
            "mitigations": {
                name: self.mitigations[name].to_json()
                for name in sorted(self.mitigations)
            },
            "drafts": [self.drafts[did].to_json() for did in sorted(self.drafts)],
            "audit": self.audit,
        }

    def save(self) -> None:
        directory = os.path.dirname(self.path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as handle:
            json.dump(self.to_json(), handle, indent=1, sort_keys=True)
            handle.write("\n")

    def catalog(self) -> ThreatCatalog:
        """The engine-facing view: finished entries only."""
        return ThreatCatalog(
            threats=dict(self.threats),
            links=dict(self.links),
            mitigations=dict(self.mitigations),
        )

    def draft_ids(self) -> list[str]:
        return sorted(self.drafts)

    def add_drafts(self, drafts: Iterable[DraftThreat]) -> list[str]:
        """Merge imported drafts, skipping ids the store already tracks."""
        added: list[str] = []
        for draft in drafts:
            if draft.id in self.threats or draft.id in self.drafts:
                self.audit.append({"event": "skip-duplicate", "id": draft.id})
                continue
            self.drafts[draft.id] = draft
            self.audit.append({"event": "import", "id": draft.id})
            added.append(draft.id)
        self.save()
        return sorted(added)


_ANNOTATION_KEYS = {"target_place", "action", "consequence", "requires", "service"}


def annotate(
    store: CatalogStore, threat_id: str, annotation: Mapping[str, Any]
) -> ThreatDefinition:
    """Complete a draft (or rewrite a finished entry) and persist the store."""
    unknown = set(annotation) - _ANNOTATION_KEYS
    if unknown:
        raise IngestError(f"unknown annotation keys: {sorted(unknown)}")
    draft = store.drafts.get(threat_id)
    previous = store.threats.get(threat_id)
    if draft is None and previous is None:
        raise UnknownId(f"no draft or threat {threat_id!r}")

    target_place = annotation.get(
        "target_place", previous.target_place if previous else None
    )
    if target_place not in store.places:
        raise UnknownPlace(f"no place {target_place!r} in the cloud model")

    issue = draft.issue if draft else previous.issue
    cia = dict(draft.cia_impact) if draft else dict(previous.cia_impact)
    base_requires = previous.requires if previous else ()
    threat = ThreatDefinition(
        id=threat_id,
        service=annotation.get("service", target_place),
        target_place=target_place,
        issue=issue,
        action=annotation.get("action", issue),
        consequence=annotation.get("consequence", ""),
        cia_impact=cia,
        requires=tuple(annotation.get("requires", base_requires)),
    )
    store.threats[threat_id] = threat
    store.drafts.pop(threat_id, None)
    store.audit.append(
        {
            "event": "annotate",
            "id": threat_id,
            "previous": previous.to_json() if previous else None,
        }
    )
    store.save()
    return threat
