import numpy as np
import pytest

from causapg.cdah import CDAH
from causapg.errors import UnknownVariableError, UnsupportedConditionError
from causapg.estimation import (estimate_all, estimate_cpd, estimate_edge,
                                eval_probability)
from causapg.cdah import ValueRule
from causapg.fixtures import (build_pair_model, exact_overlap_spec,
                              generate_cohort, random_pair_model)
from causapg.oracles import oracle_cpd, oracle_probability


def overlap_model():
    graph, _, _ = generate_cohort(exact_overlap_spec())
    snap = graph.snapshot()
    model = build_pair_model(
        snap, "SMOKING", "HEART DISEASE",
        'MATCH (p:Person)-[:HAS_HABIT]->(h:Habit {name: "Cigarettes"}) '
        "EXTRACT (p:SMOKING)",
        'MATCH (p:Person)-[:HAS_CONDITION]->(c:Condition {name: "Heart Disease"}) '
        "EXTRACT (p:`HEART DISEASE`)",
        value_rules={"SMOKING": ValueRule(prop="active")})
    return snap, model


def test_exact_overlap_probabilities():
    snap, model = overlap_model()
    dist, support = estimate_cpd(model, "SMOKING", "HEART DISEASE", snap)
    assert support == 40
    assert dist.prob("present", "present") == 1.0
    assert dist.prob("present", "absent") == 0.0
    assert dist.prob("absent", "present") == 0.0
    assert dist.prob("absent", "absent") == 1.0
    assert dist.given_domain == ("absent", "present")
    assert dist.row_counts == (60, 40)  # universe is all 100 people


def test_estimate_matches_oracle_on_random_cohorts():
    for seed in (3, 17, 91):
        snap, model = random_pair_model(seed)
        dist, support = estimate_cpd(model, "SMOKING", "DISEASE", snap)
        probs, row_totals, want_support = oracle_cpd(model, "SMOKING", "DISEASE", snap)
        assert support == want_support
        for gi, g in enumerate(dist.given_domain):
            assert dist.row_counts[gi] == row_totals[g]
            for oi, o in enumerate(dist.out_domain):
                assert dist.rows[gi][oi] == probs.get((g, o), 0.0)


def test_estimate_edge_and_all_install_cpds(cohort, demo):
    bare = demo.set_edge(demo.edge("SMOKING", "COPD").__class__(
        src="SMOKING", dst="COPD", support=0, cpd=None, ipd=None))
    one = estimate_edge(bare, "SMOKING", "COPD", cohort)
    assert one.edge("SMOKING", "COPD").support == 21
    assert one.edge("SMOKING", "COPD").cpd is not None
    refreshed = estimate_all(bare, cohort)
    assert refreshed.edge("SMOKING", "COPD").cpd.allclose(
        demo.edge("SMOKING", "COPD").cpd, tol=0.0)


def test_unknown_variable_rejected(cohort, demo):
    with pytest.raises(UnknownVariableError):
        estimate_cpd(demo, "SMOKING", "NOPE", cohort)
    with pytest.raises(UnknownVariableError):
        eval_probability(demo, cohort, ("NOPE", None))


def test_probability_point_and_table(cohort, demo):
    point = eval_probability(demo, cohort, ("COPD", "absent"), (("SMOKING", "10"),))
    assert point == pytest.approx(0.5333333333333333, abs=1e-15)
    table = eval_probability(demo, cohort, ("COPD", None), (("SMOKING", "10"),))
    assert table["absent"] == pytest.approx(point, abs=0.0)
    assert sum(table.values()) == pytest.approx(1.0, abs=1e-12)
    want = oracle_probability(demo, ("COPD", "absent"), (("SMOKING", "10"),), cohort)
    assert point == want


def test_probability_unconditional_universe_is_own_anchors(cohort, demo):
    # 27 COPD members and no conditions: the pool is just those anchors,
    # so present-category mass sums to 1 with no absent row
    table = eval_probability(demo, cohort, ("COPD", None))
    assert "absent" not in table
    assert sum(table.values()) == pytest.approx(1.0, abs=1e-12)
    point = eval_probability(demo, cohort, ("COPD", "2"))
    assert point == table["2"]
    assert point == oracle_probability(demo, ("COPD", "2"), (), cohort)


def test_probability_multi_condition(cohort, demo):
    both = eval_probability(
        demo, cohort, ("COMORBIDITY", "present"),
        (("COPD", "2"), ("SMOKING", "10")))
    want = oracle_probability(
        demo, ("COMORBIDITY", "present"), (("COPD", "2"), ("SMOKING", "10")), cohort)
    assert both == want


def test_probability_rejects_unsatisfiable_and_mixed(cohort, demo):
    with pytest.raises(UnsupportedConditionError):
        eval_probability(demo, cohort, ("COPD", None),
                         (("SMOKING", "10"), ("HEART DISEASE", None)))
    with pytest.raises(UnsupportedConditionError):
        eval_probability(demo, cohort, ("COPD", "absent"), (("SMOKING", "7"),))


def test_probability_full_table_is_estimate(cohort, demo):
    dist = eval_probability(demo, cohort, ("COPD", None), (("SMOKING", None),))
    direct, _ = estimate_cpd(demo, "SMOKING", "COPD", cohort)
    assert dist.allclose(direct, tol=0.0)


def test_no_grounded_units_rejected(cohort):
    empty = CDAH().upsert_hypernode("GHOST")
    with pytest.raises(UnsupportedConditionError):
        eval_probability(empty, cohort, ("GHOST", None))


def test_rows_are_proper_distributions(cohort, demo):
    for (src, dst) in sorted(demo.edges):
        dist, _ = estimate_cpd(demo, src, dst, cohort)
        arr = np.asarray(dist.rows)
        assert np.all(arr >= 0.0) and np.all(arr <= 1.0)
        np.testing.assert_allclose(arr.sum(axis=1), 1.0, atol=1e-12)
