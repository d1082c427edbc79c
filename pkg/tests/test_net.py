"""Markings, structural validation, hierarchy flattening.

Canonical marking strings and flattened structures below are derived by hand
from the documented rules (sorted place ids, tokens ordered by timestamp then
value, fused places adopt the parent id, submodule elements gain a
"<name>/" prefix).
"""

import pytest

from threatflow.hlpn.exprs import (
    BindVar,
    Member,
    Var,
    expr_to_sexpr,
)
from threatflow.hlpn.net import (
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
from threatflow.hlpn.values import (
    AnySet,
    CountSet,
    TextSet,
    count,
    text,
)


def tok(at, value):
    return TimedToken(at, value)


class TestMarking:
    def test_canonical_string(self):
        marking = Marking(
            {
                "Q": [tok(1, text("a"))],
                "P": [tok(2, count(1)), tok(0, count(1))],
            }
        )
        assert marking.canon() == 'P=[0:i1,2:i1];Q=[1:s"a"]'

    def test_empty_places_dropped(self):
        marking = Marking({"P": [], "Q": [tok(0, count(1))]})
        assert marking.places() == ("Q",)
        assert Marking({}).is_empty()

    def test_relative_canonical_collapses_available_tokens(self):
        marking = Marking({"P": [tok(0, count(3)), tok(2, count(5))]})
        assert marking.canon_relative(1) == "P=[0:i3,1:i5]"
        assert marking.canon_relative(5) == "P=[0:i3,0:i5]"
        assert marking.canon_relative(0) == "P=[0:i3,2:i5]"

    def test_values_ignore_timestamps(self):
        marking = Marking({"P": [tok(9, count(3))]})
        assert marking.values_in("P") == {count(3)}

    def test_with_changes(self):
        marking = Marking({"P": [tok(0, count(1)), tok(0, count(1))]})
        out = marking.with_changes(
            remove=[("P", tok(0, count(1)))], add=[("Q", tok(2, text("x")))]
        )
        assert out.canon() == 'P=[0:i1];Q=[2:s"x"]'
        with pytest.raises(NetError):
            marking.with_changes(remove=[("P", tok(5, count(1)))])

    def test_earliest_future(self):
        marking = Marking({"P": [tok(0, count(1)), tok(4, count(2))], "Q": [tok(2, count(3))]})
        assert marking.earliest_future(0) == 2
        assert marking.earliest_future(2) == 4
        assert marking.earliest_future(4) is None

    def test_counts(self):
        marking = Marking({"P": [tok(0, count(1))] * 3, "Q": [tok(0, count(2))]})
        assert marking.total_tokens() == 4
        assert marking.max_place_size() == 3

    def test_json_roundtrip(self):
        marking = Marking({"P": [tok(0, count(1)), tok(3, text("z"))]})
        assert Marking.from_json(marking.to_json()) == marking
        with pytest.raises(NetError):
            Marking.from_json({"P": [{"value": 1}]})
        with pytest.raises(NetError):
            Marking.from_json({"P": [{"at": -1, "value": 1}]})

    def test_equality_and_hash(self):
        a = Marking({"P": [tok(0, count(1)), tok(1, count(2))]})
        b = Marking({"P": [tok(1, count(2)), tok(0, count(1))]})
        assert a == b
        assert hash(a) == hash(b)


def build_two_level_net():
    child = Net(net_id="child")
    child.add_place(Place("In", CountSet()))
    child.add_place(Place("Work", CountSet()))
    child.add_transition(
        Transition("Go", guard=Member("in", Var("n"), "In")),
        inputs=[InputArc("In", BindVar("n"))],
        outputs=[OutputArc("Work", Var("n"))],
    )
    child.initial = Marking({"In": [tok(0, count(1))]})

    parent = Net(net_id="parent")
    parent.add_place(Place("Shared", CountSet()))
    parent.initial = Marking({"Shared": [tok(0, count(9))]})
    parent.add_submodule("child", child, [Fusion("Shared", "child", "In")])
    return parent


class TestFlatten:
    def test_structure(self):
        flat = flatten(build_two_level_net())
        assert flat.is_flat()
        assert sorted(flat.places) == ["Shared", "child/Work"]
        assert sorted(flat.transitions) == ["child/Go"]
        arcs = flat.input_arcs("child/Go")
        assert len(arcs) == 1 and arcs[0].place_id == "Shared"
        outs = flat.output_arcs("child/Go")
        assert len(outs) == 1 and outs[0].place_id == "child/Work"

    def test_fused_initial_tokens_merge(self):
        flat = flatten(build_two_level_net())
        assert flat.initial.canon() == "Shared=[0:i1,0:i9]"

    def test_guard_membership_redirected(self):
        flat = flatten(build_two_level_net())
        guard = flat.transitions["child/Go"].guard
        assert expr_to_sexpr(guard) == ["in", ["var", "n"], "Shared"]

    def test_flat_net_unchanged(self):
        net = Net(net_id="solo")
        net.add_place(Place("P", AnySet()))
        assert flatten(net) is net

    def test_nested_two_deep(self):
        inner = Net(net_id="inner")
        inner.add_place(Place("Port", CountSet()))
        inner.add_place(Place("Deep", CountSet()))
        inner.add_transition(
            Transition("Dig"),
            inputs=[InputArc("Port", BindVar("n"))],
            outputs=[OutputArc("Deep", Var("n"))],
        )
        mid = Net(net_id="mid")
        mid.add_place(Place("Hand", CountSet()))
        mid.add_submodule("inner", inner, [Fusion("Hand", "inner", "Port")])
        top = Net(net_id="top")
        top.add_place(Place("Root", CountSet()))
        top.initial = Marking({"Root": [tok(0, count(4))]})
        top.add_submodule("mid", mid, [Fusion("Root", "mid", "Hand")])

        flat = flatten(top)
        assert sorted(flat.places) == ["Root", "mid/inner/Deep"]
        assert sorted(flat.transitions) == ["mid/inner/Dig"]
        assert flat.input_arcs("mid/inner/Dig")[0].place_id == "Root"


class TestValidate:
    def test_clean_net(self):
        assert validate_net(build_two_level_net()) == []

    def test_defects_reported(self):
        net = Net(net_id="broken")
        net.add_place(Place("P", CountSet()))
        net.add_transition(
            Transition("T", guard=Member("in", Var("ghost"), "Nowhere")),
            inputs=[InputArc("Missing", BindVar("x"))],
            outputs=[OutputArc("AlsoMissing", Var("y"), count=0)],
        )
        net.initial = Marking({"P": [tok(0, text("wrong"))], "Zed": [tok(0, count(1))]})
        defects = "\n".join(validate_net(net))
        assert "unknown place 'Missing'" in defects
        assert "unbound variables ['ghost']" in defects
        assert "reads unknown place 'Nowhere'" in defects
        assert "unknown place 'AlsoMissing'" in defects
        assert "non-positive count" in defects
        assert "unbound variables ['y']" in defects
        assert "violates type of 'P'" in defects
        assert "unknown place 'Zed'" in defects

    def test_double_binding_flagged(self):
        net = Net(net_id="dup")
        net.add_place(Place("P", CountSet()))
        net.add_transition(
            Transition("T"),
            inputs=[InputArc("P", BindVar("x")), InputArc("P", BindVar("x"))],
        )
        defects = "\n".join(validate_net(net))
        assert "binds variable 'x' twice" in defects

    def test_fusion_defects(self):
        child = Net(net_id="child")
        child.add_place(Place("In", TextSet()))
        parent = Net(net_id="parent")
        parent.add_place(Place("Shared", CountSet()))
        parent.add_submodule("child", child, [Fusion("Shared", "child", "In")])
        defects = "\n".join(validate_net(parent))
        assert "mismatched types" in defects

        lost = Net(net_id="lost")
        lost.add_place(Place("A", CountSet()))
        lost.fusions = (Fusion("A", "nobody", "X"),)
        assert "unknown submodule 'nobody'" in "\n".join(validate_net(lost))

    def test_duplicate_ids_rejected(self):
        net = Net(net_id="n")
        net.add_place(Place("P", AnySet()))
        with pytest.raises(NetError):
            net.add_place(Place("P", AnySet()))
        net.add_transition(Transition("T"))
        with pytest.raises(NetError):
            net.add_transition(Transition("T"))
