"""Token values, canonical strings, color sets, JSON codecs.

Expected canonical strings are written out by hand from the canon grammar
(s<json-string>, i<int>, r{name=...}, t(...)) so the implementation is
checked against the documented format, not against itself.
"""

import pytest
from hypothesis import given, settings, strategies as st

from threatflow.hlpn.values import (
    AnySet,
    Count,
    CountSet,
    ListSet,
    Record,
    Row,
    Text,
    TextSet,
    ValueError_,
    colorset_from_json,
    colorset_to_json,
    count,
    record,
    record_set,
    row,
    row_set,
    text,
    typecheck_tokens,
    value_from_json,
    value_to_json,
)


class TestCanonicalStrings:
    def test_text(self):
        assert text("sm").canon() == 's"sm"'
        assert text("").canon() == 's""'
        assert text('say "hi"').canon() == 's"say \\"hi\\""'

    def test_count(self):
        assert count(7).canon() == "i7"
        assert count(0).canon() == "i0"
        assert count(-3).canon() == "i-3"

    def test_record_sorts_fields(self):
        value = record(un=text("sm"), pw=text("t1"))
        assert value.canon() == 'r{pw=s"t1",un=s"sm"}'

    def test_row(self):
        assert row(count(1), text("b")).canon() == 't(i1,s"b")'
        assert row().canon() == "t()"

    def test_nested(self):
        value = record(k=row(count(1), record(a=count(2))))
        assert value.canon() == "r{k=t(i1,r{a=i2})}"


class TestRecordSemantics:
    def test_field_order_irrelevant_for_equality(self):
        first = Record((("a", count(1)), ("b", count(2))))
        second = Record((("b", count(2)), ("a", count(1))))
        assert first == second
        assert hash(first) == hash(second)

    def test_duplicate_fields_rejected(self):
        with pytest.raises(ValueError_):
            Record((("a", count(1)), ("a", count(2))))

    def test_get_and_missing_field(self):
        value = record(a=count(1))
        assert value.get("a") == count(1)
        with pytest.raises(ValueError_):
            value.get("zz")

    def test_field_names_sorted(self):
        value = Record((("z", count(1)), ("a", count(2))))
        assert value.field_names() == ("a", "z")


class TestJsonCodec:
    def test_scalars(self):
        assert value_from_json("x") == text("x")
        assert value_from_json(4) == count(4)
        assert value_to_json(text("x")) == "x"
        assert value_to_json(count(4)) == 4

    def test_containers(self):
        data = {"un": "sm", "vms": ["vm1", "vm2"]}
        value = value_from_json(data)
        assert value == record(un=text("sm"), vms=row(text("vm1"), text("vm2")))
        assert value_to_json(value) == {"un": "sm", "vms": ["vm1", "vm2"]}

    def test_rejects_bool_and_float(self):
        with pytest.raises(ValueError_):
            value_from_json(True)
        with pytest.raises(ValueError_):
            value_from_json(1.5)

    @given(
        st.recursive(
            st.one_of(st.text(max_size=6), st.integers(-50, 50)),
            lambda leaf: st.one_of(
                st.lists(leaf, max_size=3),
                st.dictionaries(
                    st.text(min_size=1, max_size=4), leaf, max_size=3
                ),
            ),
            max_leaves=8,
        )
    )
    @settings(max_examples=60, derandomize=True)
    def test_roundtrip(self, data):
        value = value_from_json(data)
        assert value_from_json(value_to_json(value)) == value


class TestColorSets:
    def test_scalar_sets(self):
        assert TextSet().contains(text("a"))
        assert not TextSet().contains(count(1))
        assert CountSet().contains(count(1))
        assert AnySet().contains(row())

    def test_record_set_requires_exact_fields(self):
        cs = record_set(un=TextSet(), pw=TextSet())
        assert cs.contains(record(un=text("a"), pw=text("b")))
        assert not cs.contains(record(un=text("a")))
        assert not cs.contains(record(un=text("a"), pw=text("b"), extra=count(1)))
        assert not cs.contains(record(un=text("a"), pw=count(1)))

    def test_row_set_fixed_arity(self):
        cs = row_set(CountSet(), TextSet())
        assert cs.contains(row(count(1), text("x")))
        assert not cs.contains(row(count(1)))
        assert not cs.contains(row(text("x"), count(1)))

    def test_list_set_any_arity(self):
        cs = ListSet(TextSet())
        assert cs.contains(row())
        assert cs.contains(row(text("a"), text("b"), text("c")))
        assert not cs.contains(row(count(1)))

    def test_typecheck_reports_violators(self):
        bad = typecheck_tokens(CountSet(), [count(1), text("x"), count(2), row()])
        assert bad == [text("x"), row()]

    def test_json_roundtrip(self):
        sets = [
            TextSet(),
            CountSet(),
            AnySet(),
            record_set(a=CountSet(), b=ListSet(TextSet())),
            row_set(CountSet(), TextSet(), AnySet()),
            ListSet(row_set(CountSet(), CountSet())),
        ]
        for cs in sets:
            assert colorset_from_json(colorset_to_json(cs)) == cs

    def test_json_forms(self):
        assert colorset_to_json(TextSet()) == "text"
        assert colorset_to_json(record_set(b=CountSet(), a=TextSet())) == {
            "record": {"a": "text", "b": "count"}
        }
        assert colorset_to_json(row_set(CountSet(), TextSet())) == {
            "tuple": ["count", "text"]
        }
        assert colorset_from_json("any") == AnySet()
        with pytest.raises(ValueError_):
            colorset_from_json("mystery")
