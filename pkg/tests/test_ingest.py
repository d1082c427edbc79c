"""Vulnerability-feed import, manual annotation, and the file-backed catalog.

Feed fixtures are built inline in the public CVE JSON feed shape. Impact
mapping and draft bookkeeping are asserted against frozen literals; the
catalog file round-trip is checked byte for byte.
"""

import json
from pathlib import Path

import pytest

from threatflow.cloud import cloud_place_ids
from threatflow.ingest import (
    CatalogStore,
    DraftThreat,
    IngestError,
    UnknownId,
    UnknownPlace,
    annotate,
    default_catalog_path,
    import_records,
)
from threatflow.threats import load_catalog


def nvd_item(cve_id, description="an issue", v2=None, v3=None, products=()):
    item = {
        "cve": {
            "CVE_data_meta": {"ID": cve_id},
            "description": {
                "description_data": [{"lang": "en", "value": description}]
            },
        },
        "impact": {},
    }
    if description is None:
        item["cve"]["description"]["description_data"] = []
    if v2 is not None:
        item["impact"]["baseMetricV2"] = {
            "cvssV2": {f"{axis}Impact": level for axis, level in v2.items()}
        }
    if v3 is not None:
        item["impact"]["baseMetricV3"] = {
            "cvssV3": {f"{axis}Impact": level for axis, level in v3.items()}
        }
    if products:
        item["cve"]["affects"] = {
            "vendor": {
                "vendor_data": [
                    {
                        "product": {
                            "product_data": [{"product_name": p} for p in products]
                        }
                    }
                ]
            }
        }
    return item


def write_feed(path, items):
    path.write_text(json.dumps({"CVE_Items": items}), encoding="utf-8")
    return str(path)


TABLE4_IDS = [
    "CVE-2013-2006",
    "CVE-2015-3646",
    "CVE-2012-4457",
    "CVE-2013-4222",
    "CVE-2014-5251",
    "CVE-2018-14432",
    "CVE-2016-0757",
    "CVE-2014-9623",
    "CVE-2014-0134",
    "CVE-2013-7130",
    "CVE-2015-2687",
    "CVE-2016-5362",
]


class TestImport:
    def test_v2_complete_maps_to_full(self, tmp_path):
        feed = write_feed(
            tmp_path / "feed.json",
            [
                nvd_item(
                    "CVE-2013-4222",
                    description="expired tokens accepted",
                    v2={"confidentiality": "COMPLETE"},
                )
            ],
        )
        result = import_records(feed)
        assert result.errors == []
        (draft,) = result.drafts
        assert draft.id == "CVE-2013-4222"
        assert draft.issue == "expired tokens accepted"
        assert draft.cia_impact == {
            "confidentiality": "full",
            "integrity": "none",
            "availability": "none",
        }
        assert draft.missing == (
            "target_place",
            "action",
            "consequence",
            "impact:integrity",
            "impact:availability",
        )

    def test_v3_levels_map(self, tmp_path):
        feed = write_feed(
            tmp_path / "feed.json",
            [
                nvd_item(
                    "CVE-2017-5638",
                    v3={
                        "confidentiality": "HIGH",
                        "integrity": "LOW",
                        "availability": "NONE",
                    },
                )
            ],
        )
        (draft,) = import_records(feed).drafts
        assert draft.cia_impact == {
            "confidentiality": "full",
            "integrity": "partial",
            "availability": "none",
        }
        assert draft.missing == ("target_place", "action", "consequence")

    def test_v3_preferred_over_v2(self, tmp_path):
        feed = write_feed(
            tmp_path / "feed.json",
            [
                nvd_item(
                    "CVE-2014-9623",
                    v2={"confidentiality": "COMPLETE"},
                    v3={"integrity": "LOW"},
                )
            ],
        )
        (draft,) = import_records(feed).drafts
        assert draft.cia_impact["integrity"] == "partial"
        assert draft.cia_impact["confidentiality"] == "none"

    def test_absent_impact_flagged_not_invented(self, tmp_path):
        feed = write_feed(tmp_path / "feed.json", [nvd_item("CVE-2014-0134")])
        (draft,) = import_records(feed).drafts
        assert draft.cia_impact == {
            "confidentiality": "none",
            "integrity": "none",
            "availability": "none",
        }
        assert draft.missing[-3:] == (
            "impact:confidentiality",
            "impact:integrity",
            "impact:availability",
        )

    def test_bad_id_collected_import_continues(self, tmp_path):
        feed = write_feed(
            tmp_path / "feed.json",
            [
                nvd_item("CVE-13-1"),
                nvd_item("CVE-2013-7130", v2={"confidentiality": "COMPLETE"}),
            ],
        )
        result = import_records(feed)
        assert [d.id for d in result.drafts] == ["CVE-2013-7130"]
        (error,) = result.errors
        assert error.id == "CVE-13-1"
        assert "id" in error.reason

    def test_missing_description_is_malformed(self, tmp_path):
        feed = write_feed(
            tmp_path / "feed.json", [nvd_item("CVE-2015-2687", description=None)]
        )
        result = import_records(feed)
        assert result.drafts == []
        (error,) = result.errors
        assert error.id == "CVE-2015-2687"
        assert "description" in error.reason

    def test_duplicate_id_in_feed_collected(self, tmp_path):
        feed = write_feed(
            tmp_path / "feed.json",
            [nvd_item("CVE-2016-5362"), nvd_item("CVE-2016-5362")],
        )
        result = import_records(feed)
        assert [d.id for d in result.drafts] == ["CVE-2016-5362"]
        (error,) = result.errors
        assert "duplicate" in error.reason

    def test_twelve_record_feed_yields_twelve_drafts(self, tmp_path):
        feed = write_feed(
            tmp_path / "feed.json",
            [nvd_item(tid, v2={"confidentiality": "PARTIAL"}) for tid in TABLE4_IDS],
        )
        result = import_records(feed)
        assert len(result.drafts) == 12
        assert result.errors == []

    def test_products_carried_through(self, tmp_path):
        feed = write_feed(
            tmp_path / "feed.json",
            [nvd_item("CVE-2018-14635", products=("neutron", "linuxbridge"))],
        )
        (draft,) = import_records(feed).drafts
        assert draft.products == ("neutron", "linuxbridge")

    def test_unreadable_feed_raises(self, tmp_path):
        broken = tmp_path / "feed.json"
        broken.write_text("{", encoding="utf-8")
        with pytest.raises(IngestError):
            import_records(str(broken))
        with pytest.raises(IngestError):
            import_records(str(tmp_path / "absent.json"))

    def test_feed_without_item_list_raises(self, tmp_path):
        bad = tmp_path / "feed.json"
        bad.write_text(json.dumps({"vulns": []}), encoding="utf-8")
        with pytest.raises(IngestError):
            import_records(str(bad))


def seeded_store(tmp_path, *cve_ids):
    feed = write_feed(
        tmp_path / "feed.json",
        [nvd_item(tid, v2={"confidentiality": "COMPLETE"}) for tid in cve_ids],
    )
    store = CatalogStore(str(tmp_path / "threats.json"))
    added = store.add_drafts(import_records(feed).drafts)
    assert added == sorted(cve_ids)
    return store


class TestStore:
    def test_empty_store_saves_and_reloads(self, tmp_path):
        path = str(tmp_path / "threats.json")
        store = CatalogStore(path)
        store.save()
        again = CatalogStore(path)
        assert again.draft_ids() == []
        assert again.catalog().threats == {}

    def test_annotate_promotes_draft(self, tmp_path):
        store = seeded_store(tmp_path, "CVE-2013-4222")
        threat = annotate(
            store,
            "CVE-2013-4222",
            {"target_place": "AS", "consequence": "retain-token"},
        )
        assert threat.target_place == "AS"
        assert threat.consequence == "retain-token"
        assert threat.action == threat.issue
        assert threat.cia_impact["confidentiality"] == "full"
        assert store.draft_ids() == []
        assert "CVE-2013-4222" in store.catalog().threats

    def test_annotate_unknown_place(self, tmp_path):
        store = seeded_store(tmp_path, "CVE-2013-4222")
        with pytest.raises(UnknownPlace):
            annotate(
                store,
                "CVE-2013-4222",
                {"target_place": "XYZ", "consequence": "retain-token"},
            )

    def test_annotate_unknown_id(self, tmp_path):
        store = seeded_store(tmp_path, "CVE-2013-4222")
        with pytest.raises(UnknownId):
            annotate(
                store,
                "CVE-9999-0001",
                {"target_place": "AS", "consequence": "retain-token"},
            )

    def test_reannotate_replaces_and_audits(self, tmp_path):
        store = seeded_store(tmp_path, "CVE-2013-4222")
        annotate(
            store,
            "CVE-2013-4222",
            {"target_place": "AS", "consequence": "retain-token"},
        )
        annotate(
            store,
            "CVE-2013-4222",
            {"target_place": "DB", "consequence": "read-data"},
        )
        threat = store.catalog().threats["CVE-2013-4222"]
        assert threat.target_place == "DB"
        assert threat.consequence == "read-data"
        events = [e["event"] for e in store.audit if e["id"] == "CVE-2013-4222"]
        assert events == ["import", "annotate", "annotate"]
        assert store.audit[-1]["previous"]["consequence"] == "retain-token"

    def test_annotation_fields_respected(self, tmp_path):
        store = seeded_store(tmp_path, "CVE-2014-0134")
        threat = annotate(
            store,
            "CVE-2014-0134",
            {
                "target_place": "HYP",
                "action": "host-config-exposure",
                "consequence": "read-config",
                "requires": ["quota-bypass"],
                "service": "compute",
            },
        )
        assert threat.service == "compute"
        assert threat.action == "host-config-exposure"
        assert threat.requires == ("quota-bypass",)

    def test_save_load_round_trip_is_byte_identical(self, tmp_path):
        store = seeded_store(tmp_path, "CVE-2013-4222", "CVE-2014-0134")
        annotate(
            store,
            "CVE-2013-4222",
            {"target_place": "AS", "consequence": "retain-token"},
        )
        store.save()
        first = (tmp_path / "threats.json").read_bytes()
        CatalogStore(str(tmp_path / "threats.json")).save()
        second = (tmp_path / "threats.json").read_bytes()
        assert first == second

    def test_engine_loads_store_file(self, tmp_path):
        store = seeded_store(tmp_path, "CVE-2013-4222")
        annotate(
            store,
            "CVE-2013-4222",
            {"target_place": "AS", "consequence": "retain-token"},
        )
        store.save()
        catalog = load_catalog(str(tmp_path / "threats.json"))
        assert "CVE-2013-4222" in catalog.threats
        assert catalog.threats["CVE-2013-4222"].consequence == "retain-token"

    def test_add_drafts_skips_known_ids(self, tmp_path):
        store = seeded_store(tmp_path, "CVE-2013-4222")
        feed = write_feed(tmp_path / "again.json", [nvd_item("CVE-2013-4222")])
        assert store.add_drafts(import_records(feed).drafts) == []
        assert store.audit[-1]["event"] == "skip-duplicate"

    def test_places_universe_matches_cloud_model(self, tmp_path):
        store = CatalogStore(str(tmp_path / "threats.json"))
        assert store.places == cloud_place_ids()
        assert {"AS", "DB", "VM", "NET", "HYP"} <= store.places

    def test_draft_survives_reload(self, tmp_path):
        store = seeded_store(tmp_path, "CVE-2013-7130")
        store.save()
        again = CatalogStore(str(tmp_path / "threats.json"))
        assert again.draft_ids() == ["CVE-2013-7130"]
        draft = again.drafts["CVE-2013-7130"]
        assert isinstance(draft, DraftThreat)
        assert draft.missing[0] == "target_place"

    def test_existing_links_survive_round_trip(self, tmp_path):
        path = tmp_path / "threats.json"
        source = json.load(open("fixtures/table4.json", encoding="utf-8"))
        path.write_text(json.dumps(source), encoding="utf-8")
        store = CatalogStore(str(path))
        assert "CVE-2013-2006" in store.catalog().links
        store.save()
        catalog = load_catalog(str(path))
        assert "CVE-2013-2006" in catalog.links
        assert "network-segmentation" in catalog.mitigations


class TestDefaults:
    def test_default_path_honors_env(self, monkeypatch):
        monkeypatch.setenv("THREATFLOW_CATALOG", "/tmp/other.json")
        assert default_catalog_path() == "/tmp/other.json"
        monkeypatch.delenv("THREATFLOW_CATALOG")
        assert default_catalog_path() == "catalog/threats.json"

    def test_shipped_catalog_is_canonical(self, tmp_path):
        shipped = Path(__file__).resolve().parents[1] / "catalog" / "threats.json"
        store = CatalogStore(str(shipped))
        assert len(store.threats) == 20
        assert not store.drafts and not store.audit
        assert load_catalog(str(shipped)).threats.keys() == store.threats.keys()
        store.path = str(tmp_path / "again.json")
        store.save()
        assert (tmp_path / "again.json").read_bytes() == shipped.read_bytes()
