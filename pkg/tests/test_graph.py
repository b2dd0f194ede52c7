import json

import pytest

from causapg.errors import (DanglingEndpointError, DuplicateIdError,
                            GraphFormatError, UnknownIdError,
                            ValueDomainError)
from causapg.graph import (AddEdge, AddNode, PropertyGraph, RemoveEdge,
                           RemoveNode, SetEdgeProperty, SetNodeProperty,
                           canonical_form, export, ingest, update_from_json)


def small_graph():
    g = PropertyGraph()
    g.apply_update(AddNode(("Person",), {"name": "A"}, "a"))
    g.apply_update(AddNode(("Person", "Admin"), {"name": "B"}, "b"))
    g.apply_update(AddEdge("KNOWS", "a", "b", {"since": 2020}, "k1"))
    return g


def test_add_and_read_back():
    g = small_graph()
    s = g.snapshot()
    assert s.node("a").props["name"] == "A"
    assert s.node("b").labels == frozenset({"Person", "Admin"})
    assert [e.id for e in s.out_edges("a")] == ["k1"]
    assert [e.id for e in s.in_edges("b")] == ["k1"]
    assert s.node_count() == 2 and s.edge_count() == 1
    assert s.labels() == {"Person", "Admin"}
    assert [n.id for n in s.nodes_with_label("Person")] == ["a", "b"]


def test_receipts_carry_before_and_after():
    g = small_graph()
    r = g.apply_update(SetNodeProperty("a", "name", "A2"))
    item = r.items[0]
    assert item.kind == "set_node_prop"
    assert item.before.props["name"] == "A" and item.after.props["name"] == "A2"
    assert r.revision == g.revision
    r2 = g.apply_update(SetEdgeProperty("k1", "since", 2021))
    assert r2.items[0].after.props["since"] == 2021
    assert r2.revision == r.revision + 1


def test_remove_node_cascades_edges():
    g = small_graph()
    r = g.apply_update(RemoveNode("b"))
    kinds = [it.kind for it in r.items]
    assert kinds == ["remove_edge", "remove_node"]
    s = g.snapshot()
    assert not s.has_node("b")
    assert s.edge_count() == 0
    assert s.out_edges("a") == []


def test_remove_edge():
    g = small_graph()
    r = g.apply_update(RemoveEdge("k1"))
    assert r.items[0].before.type == "KNOWS" and r.items[0].after is None
    assert g.snapshot().edge_count() == 0


def test_duplicate_and_dangling_rejected():
    g = small_graph()
    with pytest.raises(DuplicateIdError):
        g.apply_update(AddNode(("Person",), {}, "a"))
    with pytest.raises(DanglingEndpointError):
        g.apply_update(AddEdge("KNOWS", "a", "missing", {}, "k2"))
    with pytest.raises(UnknownIdError):
        g.apply_update(RemoveNode("nope"))
    with pytest.raises(UnknownIdError):
        g.snapshot().node("nope")


def test_value_domain_checks():
    g = PropertyGraph()
    with pytest.raises(ValueDomainError):
        g.apply_update(AddNode((), {}, "x"))
    g.apply_update(AddNode(("T",), {}, "x"))
    with pytest.raises(ValueDomainError):
        g.apply_update(SetNodeProperty("x", "bad", object()))


def test_snapshot_is_isolated():
    g = small_graph()
    before = g.snapshot()
    g.apply_update(SetNodeProperty("a", "name", "changed"))
    assert before.node("a").props["name"] == "A"
    after = g.snapshot()
    assert after.node("a").props["name"] == "changed"
    assert after.revision > before.revision
    assert after.lineage == before.lineage


def test_auto_ids_are_fresh():
    g = PropertyGraph()
    r1 = g.apply_update(AddNode(("T",), {}))
    r2 = g.apply_update(AddNode(("T",), {}))
    ids = {r1.items[0].element_id, r2.items[0].element_id}
    assert len(ids) == 2


def test_export_ingest_round_trip(tmp_path):
    g = small_graph()
    path = tmp_path / "g.jsonl"
    export(g, str(path))
    back = ingest(str(path))
    assert canonical_form(back) == canonical_form(g)


def test_ingest_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"kind": "node", "id": "a", "labels": ["T"], "props": {}}\n'
                    "this is not json\n")
    with pytest.raises(GraphFormatError) as err:
        ingest(str(path))
    assert "line 2" in str(err.value)


def test_ingest_rejects_edge_before_node(tmp_path):
    path = tmp_path / "order.jsonl"
    rows = [
        {"kind": "edge", "id": "e", "type": "T", "src": "a", "dst": "b", "props": {}},
        {"kind": "node", "id": "a", "labels": ["T"], "props": {}},
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    with pytest.raises((GraphFormatError, DanglingEndpointError)):
        ingest(str(path))


def test_header_is_optional(tmp_path):
    path = tmp_path / "nohdr.jsonl"
    path.write_text('{"kind": "node", "id": "a", "labels": ["T"], "props": {}}\n')
    assert ingest(str(path)).snapshot().node_count() == 1


def test_update_from_json_round_trip():
    up = update_from_json({"op": "add_node", "labels": ["T"], "props": {"k": 1}, "id": "z"})
    assert isinstance(up, AddNode) and up.id == "z"
    with pytest.raises(GraphFormatError):
        update_from_json({"op": "explode"})
    with pytest.raises(GraphFormatError):
        update_from_json({"op": "add_edge", "type": "T"})


def test_touched_labels_and_types():
    g = small_graph()
    r = g.apply_update(RemoveNode("b"))
    assert "Admin" in r.touched_labels()
    assert r.touched_types() == frozenset({"KNOWS"})
