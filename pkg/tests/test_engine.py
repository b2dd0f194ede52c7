import pytest

from causapg.cdah import CDAH, Distribution
from causapg.equations import parse_equation
from causapg.errors import (EvaluationError, PathExplosionError,
                            UnboundVariableError, UnsupportedConditionError)
from causapg.graph import AddEdge, AddNode, PropertyGraph
from causapg.query.engine import evaluate, render_value


def stops_graph():
    """s0 -NEXT-> s1 -NEXT-> s2 -NEXT-> s3 -NEXT-> s4, plus a skip s0 -NEXT-> s2."""
    g = PropertyGraph()
    for i in range(5):
        g.apply_update(AddNode(labels=("Stop",), props={"idx": i}, id=f"s{i}"))
    for i in range(4):
        g.apply_update(AddEdge(type="NEXT", src=f"s{i}", dst=f"s{i + 1}", id=f"e{i}"))
    g.apply_update(AddEdge(type="NEXT", src="s0", dst="s2", id="skip"))
    return g.snapshot()


def pair_graph():
    g = PropertyGraph()
    g.apply_update(AddNode(labels=("Person",), props={"name": "a"}, id="a"))
    g.apply_update(AddNode(labels=("Person",), props={"name": "b"}, id="b"))
    g.apply_update(AddEdge(type="KNOWS", src="a", dst="b", id="k"))
    return g.snapshot()


def scm_model():
    m = CDAH().upsert_hypernode("SMOKING").upsert_hypernode("COPD")
    m = m.add_causal_edge("SMOKING", "COPD")
    return m.set_equation("COPD", parse_equation("COPD = 0.3 * SMOKING + eps"))


def test_two_variables_may_share_a_node():
    snap = pair_graph()
    res = evaluate("MATCH (a:Person), (b:Person) RETURN a.name, b.name", snap)
    assert sorted(res.tuples()) == [("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")]


def test_edges_distinct_within_one_match():
    snap = pair_graph()
    res = evaluate("MATCH (a)-[e1:KNOWS]->(b), (c)-[e2:KNOWS]->(d) RETURN e1", snap)
    assert res.rows == []
    res2 = evaluate("MATCH (a)-[e1:KNOWS]->(b) MATCH (c)-[e2:KNOWS]->(d) RETURN e1, e2",
                    snap)
    assert len(res2.rows) == 1


def test_plain_match_dedups_bindings():
    snap = stops_graph()
    q = "MATCH (a {idx: 0})-->*(b {idx: 2}) RETURN a.idx, b.idx"
    plain = evaluate(q, snap)
    assert plain.tuples() == [(0, 2)]
    every = evaluate("MATCH ALL (a {idx: 0})-->*(b {idx: 2}) RETURN a.idx, b.idx", snap)
    assert every.tuples() == [(0, 2), (0, 2)]


def test_shortest_keeps_k_per_endpoint_pair():
    snap = stops_graph()
    q = "MATCH SHORTEST 1 pth=(a {idx: 0})-->*(b {idx: 3}) RETURN pth"
    res = evaluate(q, snap)
    assert len(res.rows) == 1
    assert res.rows[0]["pth"].length == 2  # via the skip edge
    both = evaluate("MATCH SHORTEST 2 pth=(a {idx: 0})-->*(b {idx: 3}) RETURN pth", snap)
    assert sorted(p.length for (p,) in both.tuples()) == [2, 3]


def test_named_path_renders():
    snap = pair_graph()
    res = evaluate("MATCH pth=(a)-[:KNOWS]->(b) RETURN pth", snap)
    view = render_value(res.rows[0]["pth"])
    assert view["kind"] == "path" and view["length"] == 1
    assert [n["id"] for n in view["nodes"]] == ["a", "b"]


def test_star_requires_at_least_one_edge():
    snap = pair_graph()
    res = evaluate("MATCH (a)-->*(b) RETURN a.name, b.name", snap)
    assert res.tuples() == [("a", "b")]  # no zero-length match of a onto itself


def test_star_budget_explodes():
    g = PropertyGraph()
    for i in range(8):
        g.apply_update(AddNode(labels=("N",), id=f"n{i}"))
    for i in range(8):
        for j in range(8):
            if i != j:
                g.apply_update(AddEdge(type="T", src=f"n{i}", dst=f"n{j}"))
    snap = g.snapshot()
    with pytest.raises(PathExplosionError):
        evaluate("MATCH (a)-->*(b) RETURN a", snap)
    # a small budget trips immediately
    with pytest.raises(PathExplosionError):
        evaluate("MATCH (a)-->*(b) RETURN a", stops_graph(), max_paths=3)


def test_exists_filters_rows():
    snap = stops_graph()
    q = ("MATCH (a:Stop) WHERE EXISTS { (a)-[:NEXT]->(b {idx: 2}) } "
         "RETURN a.idx")
    res = evaluate(q, snap)
    assert sorted(t[0] for t in res.tuples()) == [0, 1]


def test_belongs_walks_both_directions(cohort, demo):
    snap, model = cohort, demo
    out = evaluate("MATCH (p)-[:BELONGS]->(v:SMOKING) RETURN p", snap, model)
    assert len(out.rows) == 40
    back = evaluate("MATCH (v:SMOKING)<-[:BELONGS]-(p) RETURN p", snap, model)
    assert {render_value(r["p"])["id"] for r in back.rows} \
        == {render_value(r["p"])["id"] for r in out.rows}


def test_causal_label_wins_over_node_label():
    g = PropertyGraph()
    g.apply_update(AddNode(labels=("X",), id="n1"))
    snap = g.snapshot()
    model = CDAH().upsert_hypernode("X")
    with_model = evaluate("MATCH (a:X) RETURN labels(a)", snap, model)
    assert with_model.tuples() == [(["X"],)]
    assert render_value(with_model.rows[0]["labels(a)"]) == ["X"]
    assert evaluate("MATCH (a:X) RETURN a", snap, model).rows[0]["a"].variable == "X"
    without = evaluate("MATCH (a:X) RETURN a", snap)
    assert render_value(without.rows[0]["a"])["kind"] == "node"


def test_hypernode_edges_are_causal(cohort, demo):
    snap, model = cohort, demo
    res = evaluate("MATCH (x:SMOKING)-->(y) RETURN y, labels(y)", snap, model)
    names = sorted(r["y"].variable for r in res.rows)
    assert names == ["COPD", "HEART DISEASE"]
    res_in = evaluate("MATCH (y:COMORBIDITY)<--(x) RETURN x", snap, model)
    assert sorted(r["x"].variable for r in res_in.rows) == ["COPD", "HEART DISEASE"]


def test_labels_function_per_kind(cohort, demo):
    snap, model = cohort, demo
    edge = evaluate("MATCH (a)-[e:HAS_HABIT]->(b) RETURN labels(e)", snap, model)
    assert edge.rows[0]["labels(e)"] == ["HAS_HABIT"]
    bel = evaluate("MATCH (p)-[b:BELONGS]->(v:SMOKING) RETURN labels(b)", snap, model)
    assert bel.rows[0]["labels(b)"] == ["BELONGS"]
    ced = evaluate("MATCH (x:SMOKING)-[c]->(y:COPD) RETURN labels(c)", snap, model)
    assert ced.rows[0]["labels(c)"] == ["CAUSES"]


def test_missing_property_comparisons_are_unknown():
    snap = pair_graph()
    base = "MATCH (a:Person {name: \"a\"}) WHERE %s RETURN a.name"
    assert evaluate(base % "a.missing = 1", snap).rows == []
    assert evaluate(base % "NOT (a.missing = 1)", snap).rows == []
    assert evaluate(base % "a.missing = 1 OR true", snap).tuples() == [("a",)]
    assert evaluate(base % "a.missing = 1 AND false", snap).rows == []
    assert evaluate(base % "a.missing >= 0", snap).rows == []


def test_cross_type_comparisons_are_false_not_unknown():
    snap = pair_graph()
    res = evaluate('MATCH (a:Person {name: "a"}) WHERE a.name < 1 RETURN a', snap)
    assert res.rows == []
    res2 = evaluate('MATCH (a:Person {name: "a"}) WHERE NOT (a.name = 1) RETURN a.name',
                    snap)
    assert res2.tuples() == [("a",)]


def test_arithmetic_and_errors():
    snap = pair_graph()
    assert evaluate("RETURN 1 + 2 * 3 AS x", snap).tuples() == [(7,)]
    assert evaluate('RETURN "a" + "b" AS x', snap).tuples() == [("ab",)]
    assert evaluate("RETURN -(2 + 3) AS x", snap).tuples() == [(-5,)]
    with pytest.raises(EvaluationError):
        evaluate("RETURN 1 / 0 AS x", snap)
    with pytest.raises(EvaluationError):
        evaluate('RETURN 1 + "a" AS x', snap)


def test_count_and_distinct_aggregate():
    snap = stops_graph()
    res = evaluate("MATCH (a:Stop) RETURN count(a) AS n", snap)
    assert res.tuples() == [(5,)]
    res2 = evaluate("MATCH (a:Stop)-[:NEXT]->(b:Stop) RETURN distinct(a.idx) AS srcs",
                    snap)
    assert res2.tuples() == [([0, 1, 2, 3],)]


def test_with_rebinding_restricts_columns():
    snap = stops_graph()
    res = evaluate("MATCH (a:Stop) WITH a.idx AS i RETURN i", snap)
    assert sorted(t[0] for t in res.tuples()) == [0, 1, 2, 3, 4]
    with pytest.raises(UnboundVariableError):
        evaluate("MATCH (a:Stop) WITH a.idx AS i RETURN a", snap)


def test_probability_shapes(cohort, demo):
    snap, model = cohort, demo
    point = evaluate(
        'RETURN PROBABILITY(COPD = "absent" | SMOKING = "10")', snap, model)
    val = point.rows[0][point.columns[0]]
    assert val == pytest.approx(0.5333333333333333, abs=1e-12)

    table = evaluate('RETURN PROBABILITY(COPD | SMOKING = "10")', snap, model)
    dist = table.rows[0][table.columns[0]]
    assert isinstance(dist, dict)
    assert dist["absent"] == pytest.approx(0.5333333333333333, abs=1e-12)

    full = evaluate("RETURN PROBABILITY(COPD | SMOKING)", snap, model)
    d = full.rows[0][full.columns[0]]
    assert isinstance(d, Distribution)
    assert d.given_domain == ("2", "5", "10", "absent")

    with pytest.raises(UnsupportedConditionError):
        evaluate("RETURN PROBABILITY(COPD | SMOKING, `HEART DISEASE`)", snap, model)
    with pytest.raises(EvaluationError):
        evaluate("RETURN PROBABILITY(COPD)", snap)  # no model


def test_do_calculus_values_and_flags():
    snap = pair_graph()
    model = scm_model()
    res = evaluate("RETURN DO-CALCULUS([SMOKING = 5.0], [COPD])", snap, model)
    assert res.rows[0][res.columns[0]] == pytest.approx(1.5, abs=1e-12)
    assert res.warnings == []  # SMOKING is severed, COPD has an equation

    flagged = evaluate("RETURN DO_CALCULUS([COPD = 1.0], [SMOKING])", snap, model)
    assert flagged.rows[0][flagged.columns[0]] == 0.0
    assert any("no structural equation" in w for w in flagged.warnings)

    res2 = evaluate(
        "RETURN DO_CALCULUS([eps(COPD) = 0.4, SMOKING = 5.0], [COPD, COPD * 2])",
        snap, model)
    assert res2.rows[0][res2.columns[0]] == pytest.approx([1.9, 3.8], abs=1e-12)

    res3 = evaluate("RETURN DO_CALCULUS([eps(SMOKING) = 2.0], [COPD])", snap, model)
    assert res3.rows[0][res3.columns[0]] == pytest.approx(0.6, abs=1e-12)
    assert any("defaulted to 0" in w for w in res3.warnings)

    with pytest.raises(EvaluationError):
        evaluate("RETURN DO_CALCULUS([SMOKING = 1.0], [COPD])", snap)  # no model


def test_extract_builds_members_with_footprints(cohort):
    q = ("MATCH (p:Person)-[e:HAS_HABIT]->(h:Habit {name: \"Cigarettes\"}) "
         "EXTRACT (p:SMOKING)")
    res = evaluate(q, cohort)
    assert res.kind == "extract"
    model = res.cdah
    members = model.variables["SMOKING"].members
    assert len(members) == 40
    m = members[0]
    assert m.anchor in m.nodes and len(m.nodes) == 2 and len(m.edges) == 1


def test_extract_reports_and_dedups(cohort):
    q = ("MATCH (p:Person)-[e:HAS_HABIT]->(h:Habit {name: \"Cigarettes\"}) "
         "EXTRACT (p:SMOKING)")
    first = evaluate(q, cohort)
    assert first.report.created["SMOKING"] == 40
    again = evaluate(q, cohort, first.cdah)
    assert again.report.created["SMOKING"] == 0
    assert again.report.total_members["SMOKING"] == 40
    assert len(again.cdah.variables["SMOKING"].members) == 40


def test_extract_records_origin_and_edge(cohort):
    q = ('MATCH (p:Person)-[:HAS_HABIT]->(h:Habit {name: "Cigarettes"}), '
         '(p)-[:HAS_CONDITION]->(c:Condition {name: "COPD"}) '
         "EXTRACT (p:SMOKING)-->(p:COPD)")
    res = evaluate(q, cohort)
    model = res.cdah
    assert ("SMOKING", "COPD") in model.edges
    assert res.report.new_edges == [("SMOKING", "COPD")]
    assert [v for v, _ in model.origins] == ["SMOKING", "COPD"]
    assert all(text == q for _, text in model.origins)


def test_extract_zero_match_warns(cohort):
    res = evaluate("MATCH (p:Pet) EXTRACT (p:PETS)", cohort)
    assert any("matches nothing" in w or "no members" in w for w in res.warnings)
    assert res.report.total_members["PETS"] == 0


def test_extract_anchor_must_be_a_node(cohort):
    with pytest.raises(EvaluationError):
        evaluate("MATCH (p:Person) WITH p.name AS p EXTRACT (p:SMOKING)", cohort)


def test_merge_warns_and_matches_extract(cohort):
    q = ("MATCH (p:Person)-[e:HAS_HABIT]->(h:Habit {name: \"Cigarettes\"}) "
         "MERGE (p:SMOKING)")
    res = evaluate(q, cohort)
    assert any("MERGE" in w for w in res.warnings)
    ex = evaluate(q.replace("MERGE", "EXTRACT"), cohort)
    assert {m.anchor for m in res.cdah.variables["SMOKING"].members} \
        == {m.anchor for m in ex.cdah.variables["SMOKING"].members}


def test_evaluate_accepts_prebuilt_ast(cohort):
    from causapg.query.parser import parse
    ast = parse("MATCH (p:Person) RETURN count(p) AS n")
    res = evaluate(ast, cohort)
    assert res.tuples() == [(100,)]


def test_demo_model_support_counts(demo):
    model = demo
    assert model.edges[("SMOKING", "COPD")].support == 21
    assert model.edges[("SMOKING", "HEART DISEASE")].support == 20
    assert model.edges[("COPD", "COMORBIDITY")].support == 14
    counts = {v: len(model.variables[v].members) for v in sorted(model.variables)}
    assert counts == {"COMORBIDITY": 14, "COPD": 27,
                      "HEART DISEASE": 25, "SMOKING": 40}
