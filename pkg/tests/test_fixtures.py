"""The bundled example data and the cohort generator behind it.

The byte-level checks guard against silent drift: the files under fixtures/
are committed, and regenerating them must reproduce them exactly.
"""

import filecmp
import os
from dataclasses import replace

import numpy as np
import pytest

from causapg import fixtures
from causapg.cdah import load_cdah, save_cdah
from causapg.errors import CohortSpecError
from causapg.fixtures import (Attachment, CohortSpec, ali_graph, cohort100_graph,
                              cohort100_spec, exact_overlap_spec, generate_cohort,
                              random_cohort_spec, random_pair_model)
from causapg.graph import canonical_form, export, ingest

from conftest import fixture_path


def test_bundled_files_regenerate_identically(tmp_path):
    assert fixtures.main([str(tmp_path)]) == 0
    for name in ("ali.jsonl", "cohort100.jsonl", "demo_model.json"):
        assert filecmp.cmp(str(tmp_path / name), fixture_path(name),
                           shallow=False), f"{name} drifted from its generator"


def test_cohort_generation_is_deterministic(tmp_path):
    spec = cohort100_spec()
    g1, cols1, pres1 = generate_cohort(spec)
    g2, cols2, pres2 = generate_cohort(spec)
    a, b = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
    export(g1, a)
    export(g2, b)
    assert filecmp.cmp(a, b, shallow=False)
    for var in cols1:
        assert np.array_equal(cols1[var], cols2[var])
        assert np.array_equal(pres1[var], pres2[var])


def test_attachments_draw_from_independent_substreams():
    # loosening one attachment's presence must not reshuffle the others
    spec = cohort100_spec()
    drinking = spec.attachments[1]
    assert drinking.variable == "DRINKING"
    loose = replace(spec, attachments=(
        spec.attachments[0],
        replace(drinking, present=("prob", 0.9)),
        *spec.attachments[2:],
    ))
    _, cols1, pres1 = generate_cohort(spec)
    _, cols2, pres2 = generate_cohort(loose)
    assert not np.array_equal(pres1["DRINKING"], pres2["DRINKING"])
    for var in ("SMOKING", "COPD", "HEART DISEASE", "AGE"):
        assert np.array_equal(cols1[var], cols2[var])
        assert np.array_equal(pres1[var], pres2[var])


def test_absent_values_read_as_zero_downstream():
    spec = CohortSpec(n=500, seed=3, attachments=(
        Attachment("X", "habit", node_props=(("name", "X"),), value_prop="v",
                   value=("bool_prob", 0.9), present=("prob", 0.5)),
        Attachment("Y", "condition", node_props=(("name", "Y"),), value_prop="w",
                   value=("linear", (("X", 2.0),), 0.0, 0.0)),
    ))
    _, cols, pres = generate_cohort(spec)
    assert np.all(cols["X"][~pres["X"]] == 0.0)
    assert np.array_equal(cols["Y"], 2.0 * cols["X"])


def test_exact_overlap_pairs_condition_with_active_habit():
    _, cols, pres = generate_cohort(exact_overlap_spec())
    assert int(pres["HEART DISEASE"].sum()) == 40
    assert np.array_equal(pres["HEART DISEASE"], cols["SMOKING"] != 0.0)


def test_ali_graph_shape():
    snap = ali_graph().snapshot()
    assert len(snap.nodes) == 5 and len(snap.edges) == 4
    assert snap.node("p0").props["name"] == "Ali"
    assert len(snap.nodes_with_label("Habit")) == 2
    assert len(snap.nodes_with_label("Condition")) == 2


def test_cohort100_shape(cohort):
    assert len(cohort.nodes) == 245
    assert len(cohort.edges) == 145
    assert len(cohort.nodes_with_label("Person")) == 100
    # the smoking quota is exact, the probabilistic columns are not
    smokers = [n for n in cohort.nodes_with_label("Habit")
               if n.props.get("name") == "Cigarettes"]
    assert len(smokers) == 40


def test_demo_model_round_trips_through_json(demo, tmp_path):
    path = str(tmp_path / "model.json")
    save_cdah(demo, path)
    loaded = load_cdah(path)
    assert loaded == demo
    assert loaded.over is None  # files carry no snapshot


def test_demo_model_file_matches_committed(demo):
    assert load_cdah(fixture_path("demo_model.json")) == demo


def test_graph_round_trips_through_jsonl(cohort, tmp_path):
    path = str(tmp_path / "graph.jsonl")
    export(cohort, path)
    back = ingest(path)
    assert back.revision == 0
    assert dict(back.nodes) == dict(cohort.nodes)
    assert dict(back.edges) == dict(cohort.edges)
    assert canonical_form(back) == canonical_form(cohort)


def _gen(attachments, n=10, seed=1):
    return generate_cohort(CohortSpec(n=n, seed=seed, attachments=attachments))


def test_unknown_value_rule_is_rejected():
    with pytest.raises(CohortSpecError, match="unknown value rule"):
        _gen((Attachment("X", "habit", value_prop="v", value=("weird", 1)),))


def test_unknown_presence_rule_is_rejected():
    with pytest.raises(CohortSpecError, match="unknown presence rule"):
        _gen((Attachment("X", "habit", present=("sometimes",)),))


def test_value_dependency_must_exist():
    with pytest.raises(CohortSpecError, match="depends on unknown 'NOPE'"):
        _gen((Attachment("X", "habit", value_prop="v",
                         value=("bool_by", "NOPE", ((0.0, 0.5), (1.0, 0.5)))),))
    with pytest.raises(CohortSpecError, match="depends on unknown 'NOPE'"):
        _gen((Attachment("X", "habit", value_prop="v",
                         value=("linear", (("NOPE", 1.0),), 0.0, 0.0)),))


def test_presence_dependency_must_exist():
    with pytest.raises(CohortSpecError, match="conditions on unknown 'NOPE'"):
        _gen((Attachment("X", "condition",
                         present=("prob_by_presence", "NOPE", 0.5, 0.1)),))
    with pytest.raises(CohortSpecError, match="conditions on unknown 'NOPE'"):
        _gen((Attachment("X", "condition", present=("iff", "NOPE")),))


def test_duplicate_attachment_variable_is_rejected():
    att = Attachment("X", "habit")
    with pytest.raises(CohortSpecError, match="duplicate attachment variable"):
        _gen((att, att))


def test_person_prop_needs_a_value_prop():
    with pytest.raises(CohortSpecError, match="needs a value_prop"):
        _gen((Attachment("X", "person_prop"),))


def test_unknown_shape_is_rejected():
    with pytest.raises(CohortSpecError, match="unknown attachment shape"):
        _gen((Attachment("X", "blob"),))


def test_random_cohort_specs_are_seed_stable():
    for seed in (0, 1, 7):
        assert random_cohort_spec(seed) == random_cohort_spec(seed)
    assert random_cohort_spec(1) != random_cohort_spec(2)


def test_random_pair_model_builds_both_variables():
    snap, model = random_pair_model(5)
    assert set(model.variables) == {"SMOKING", "DISEASE"}
    assert ("SMOKING", "DISEASE") in model.edges
    assert model.edges[("SMOKING", "DISEASE")].cpd is not None
    assert all(snap.has_node(m.anchor)
               for m in model.variables["SMOKING"].members)
