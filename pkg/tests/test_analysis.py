import itertools

import pytest

from causapg.analysis import (AssociationCandidate, cramers_v, d_separated,
                              find_colliders, find_confounders,
                              find_mediators, scan_associations, tv_distance,
                              validate_edge)
from causapg.cdah import CDAH, Distribution
from causapg.errors import UnknownVariableError
from causapg.fixtures import random_pair_model
from causapg.oracles import (enumerate_dags, model_from_dag,
                             oracle_contingency, oracle_dsep)


def chain():
    m = CDAH()
    for v in "ABC":
        m = m.upsert_hypernode(v)
    return m.add_causal_edge("A", "B").add_causal_edge("B", "C")


def fork():
    m = CDAH()
    for v in "ABC":
        m = m.upsert_hypernode(v)
    return m.add_causal_edge("B", "A").add_causal_edge("B", "C")


def collider():
    m = CDAH()
    for v in "ABC":
        m = m.upsert_hypernode(v)
    return m.add_causal_edge("A", "B").add_causal_edge("C", "B")


def test_dsep_on_canonical_shapes():
    assert not d_separated(chain(), "A", "C")
    assert d_separated(chain(), "A", "C", ["B"])
    assert not d_separated(fork(), "A", "C")
    assert d_separated(fork(), "A", "C", ["B"])
    assert d_separated(collider(), "A", "C")
    assert not d_separated(collider(), "A", "C", ["B"])


def test_dsep_collider_descendant_opens():
    m = collider().upsert_hypernode("D").add_causal_edge("B", "D")
    assert d_separated(m, "A", "C")
    assert not d_separated(m, "A", "C", ["D"])


def test_dsep_explain_gives_witness():
    res = d_separated(chain(), "A", "C", explain=True)
    assert not res.separated and res.witness == ("A", "B", "C")
    blocked = d_separated(chain(), "A", "C", ["B"], explain=True)
    assert blocked.separated and blocked.witness is None


def test_dsep_argument_validation():
    with pytest.raises(UnknownVariableError):
        d_separated(chain(), "A", "Z")
    with pytest.raises(ValueError):
        d_separated(chain(), "A", "A")
    with pytest.raises(ValueError):
        d_separated(chain(), "A", "C", ["A"])


def test_dsep_matches_oracle_exhaustively_small():
    # every DAG on 4 nodes, every ordered pair, every conditioning subset
    for names, edges in enumerate_dags(4):
        model = model_from_dag(names, edges)
        for x, y in itertools.permutations(names, 2):
            rest = [v for v in names if v not in (x, y)]
            for r in range(len(rest) + 1):
                for given in itertools.combinations(rest, r):
                    assert d_separated(model, x, y, given) == \
                        oracle_dsep(set(names), set(model.edges), x, y, given)


def test_demo_roles(demo):
    meds = find_mediators(demo, "SMOKING", "COMORBIDITY")
    assert [(m.variable, m.confound_free) for m in meds] == \
        [("COPD", False), ("HEART DISEASE", False)]
    assert find_colliders(demo, "COPD", "HEART DISEASE") == ["COMORBIDITY"]
    assert find_confounders(demo, "COPD", "HEART DISEASE") == ["SMOKING"]
    assert find_confounders(demo, "SMOKING", "COPD") == []
    with pytest.raises(UnknownVariableError):
        find_mediators(demo, "SMOKING", "NOPE")


def test_mediator_confound_free_on_clean_chain():
    meds = find_mediators(chain(), "A", "C")
    assert [(m.variable, m.confound_free) for m in meds] == [("B", True)]


def test_confounder_requires_disjoint_paths():
    # D -> A, D -> B -> A: the only D..A / D..B path pair shares B,
    # so D confounds (A, B) only through the B-free route
    m = CDAH()
    for v in "ABD":
        m = m.upsert_hypernode(v)
    m = (m.add_causal_edge("D", "A").add_causal_edge("D", "B")
          .add_causal_edge("B", "A"))
    assert find_confounders(m, "A", "B") == ["D"]
    # removing the direct D -> A edge leaves every D-to-A path through B
    m2 = CDAH()
    for v in "ABD":
        m2 = m2.upsert_hypernode(v)
    m2 = m2.add_causal_edge("D", "B").add_causal_edge("B", "A")
    assert find_confounders(m2, "A", "B") == []


def test_tv_distance_cases():
    a = Distribution("cpd", ("x",), ("u", "v"), ((0.5, 0.5),), (10,))
    same = Distribution("cpd", ("x",), ("u", "v"), ((0.5, 0.5),), (99,))
    assert tv_distance(a, same) == 0.0
    moved = Distribution("cpd", ("x",), ("u", "v"), ((0.8, 0.2),), (10,))
    assert tv_distance(a, moved) == pytest.approx(0.3, abs=1e-15)
    widened = Distribution("cpd", ("x", "y"), ("u", "v"),
                           ((0.5, 0.5), (1.0, 0.0)), (10, 5))
    assert tv_distance(a, widened) == 1.0  # row y exists on one side only
    disjoint_out = Distribution("cpd", ("x",), ("w",), ((1.0,),), (10,))
    assert tv_distance(a, disjoint_out) == 1.0


def test_cramers_v_matches_oracle(cohort, demo):
    for (x, y) in sorted(demo.edges):
        got = cramers_v(demo, x, y, cohort)
        x_labels = demo.unit_labels(x, cohort)
        y_labels = demo.unit_labels(y, cohort)
        pairs = [(x_labels.get(u, "absent"), y_labels.get(u, "absent"))
                 for u in sorted(set(x_labels) | set(y_labels))]
        _, want = oracle_contingency(pairs)
        assert got == pytest.approx(want, abs=1e-12)


def test_cramers_v_degenerate_dimension_is_zero():
    m = CDAH().upsert_hypernode("X").upsert_hypernode("Y")
    from causapg.cdah import Member
    for i in range(5):
        m = m.upsert_hypernode("X", Member(anchor=f"u{i}", nodes=frozenset(),
                                           edges=frozenset()))
        m = m.upsert_hypernode("Y", Member(anchor=f"u{i}", nodes=frozenset(),
                                           edges=frozenset()))
    # same membership, no value rules: both are constant "present"
    assert cramers_v(m, "X", "Y") == 0.0


def test_validate_edge_verdicts(cohort, demo):
    for (x, y) in sorted(demo.edges):
        v = validate_edge(demo, x, y, cohort)
        assert v.verdict == "valid" and v.tv == 0.0
    # a stale table drifts: hand each given category another category's row
    stale = demo.edge("SMOKING", "COPD").cpd
    bent = Distribution(stale.kind, stale.given_domain, stale.out_domain,
                        tuple(reversed(stale.rows)), stale.row_counts)
    from causapg.cdah import CausalEdge
    patched = demo.set_edge(CausalEdge("SMOKING", "COPD", support=21, cpd=bent))
    moved = validate_edge(patched, "SMOKING", "COPD", cohort)
    assert moved.verdict == "drifted" and moved.tv > 0.05


def test_validate_edge_unsupported():
    m = CDAH().upsert_hypernode("X").upsert_hypernode("Y")
    from causapg.cdah import Member
    m = m.upsert_hypernode("X", Member("a", frozenset(), frozenset()))
    m = m.upsert_hypernode("Y", Member("b", frozenset(), frozenset()))
    m = m.add_causal_edge("X", "Y")
    v = validate_edge(m, "X", "Y")
    assert v.verdict == "unsupported" and v.support == 0 and v.dependence == 0.0


def test_validate_edge_low_dependence_is_drifted():
    snap, model = random_pair_model(29)
    # sever the association by scrambling: estimate against an unrelated pair
    # is overkill; instead assert the rho knob flips the verdict
    strict = validate_edge(model, "SMOKING", "DISEASE", snap, rho=1.01)
    assert strict.verdict == "drifted"
    loose = validate_edge(model, "SMOKING", "DISEASE", snap, rho=0.0)
    assert loose.verdict == "valid"


def test_scan_associations_ranks_real_pairs(cohort, demo):
    cands = scan_associations(demo, cohort, rho=0.1)
    pairs = {(c.a, c.b) for c in cands}
    assert ("COPD", "SMOKING") in pairs or ("SMOKING", "COPD") in pairs
    deps = [c.dependence for c in cands]
    assert deps == sorted(deps, reverse=True)
    assert all(isinstance(c, AssociationCandidate) and c.dependence >= 0.1
               for c in cands)


def test_scan_respects_variable_subset(cohort, demo):
    cands = scan_associations(demo, cohort, variables=["SMOKING", "COPD"], rho=0.0)
    assert {(c.a, c.b) for c in cands} == {("COPD", "SMOKING")}
    with pytest.raises(UnknownVariableError):
        scan_associations(demo, cohort, variables=["SMOKING", "NOPE"])


def test_scan_coarsens_wide_numeric_domains():
    from causapg.cdah import Member, ValueRule
    from causapg.graph import AddNode, PropertyGraph
    g = PropertyGraph()
    m = CDAH().upsert_hypernode("A").upsert_hypernode("B")
    for i in range(60):
        g.apply_update(AddNode(labels=("U",), props={"a": float(i), "b": float(i) + 0.5},
                               id=f"u{i}"))
        mem = Member(anchor=f"u{i}", nodes=frozenset({f"u{i}"}), edges=frozenset())
        m = m.upsert_hypernode("A", mem).upsert_hypernode("B", mem)
    m = m.set_value_rule("A", ValueRule(prop="a")).set_value_rule("B", ValueRule(prop="b"))
    snap = g.snapshot()
    cands = scan_associations(m, snap, rho=0.5, bins=4)
    assert cands and cands[0].dependence > 0.9  # perfectly associated after binning
