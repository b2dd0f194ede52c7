"""Deterministic example graphs and cohort generators.

A cohort is a population of Person nodes with habit/condition attachments
whose presence and values are drawn from seeded substreams, one pair of
streams per attachment. Noise and values are drawn for every unit whether or
not the attachment ends up present, so editing presence rules never
reshuffles the values of unrelated units.

``python -m causapg.fixtures <dir>`` writes the bundled example files.
"""

from __future__ import annotations

import random
import sys
from dataclasses import dataclass

import numpy as np

from .cdah import CDAH, ValueRule
from .errors import CohortSpecError
from .estimation import estimate_all
from .graph import AddEdge, AddNode, PropertyGraph, SetNodeProperty, export

HABIT_EDGE = "HAS_HABIT"
CONDITION_EDGE = "HAS_CONDITION"


@dataclass(frozen=True)
class Attachment:
    """One column of a cohort: a habit, a condition, or a person property."""

    variable: str
    shape: str                       # "habit" | "condition" | "person_prop"
    node_props: tuple = ()           # static identifying props, (key, value) pairs
    value_prop: str | None = None
    value: tuple | None = None       # see _values
    present: tuple = ("always",)     # see _presence


@dataclass(frozen=True)
class CohortSpec:
    n: int
    seed: int
    attachments: tuple[Attachment, ...]


def _values(att: Attachment, n: int, rng, columns) -> tuple[np.ndarray, list]:
    """Numeric column plus the raw scalars to write as properties."""
    kind = att.value[0] if att.value else "none"
    if kind == "none":
        raw = [True] * n
        return np.ones(n), raw
    if kind == "const":
        v = att.value[1]
        return np.full(n, float(v)), [v] * n
    if kind == "choice":
        _, values, probs = att.value
        idx = rng.choice(len(values), size=n, p=list(probs))
        raw = [values[i] for i in idx]
        return np.array([float(v) for v in raw]), raw
    if kind == "bool_prob":
        flags = rng.random(n) < att.value[1]
        return flags.astype(float), [bool(f) for f in flags]
    if kind == "bool_by":
        _, var, table = att.value
        if var not in columns:
            raise CohortSpecError(f"{att.variable!r} depends on unknown {var!r}")
        lookup = dict(table)
        p = np.array([lookup[float(v)] for v in columns[var]])
        flags = rng.random(n) < p
        return flags.astype(float), [bool(f) for f in flags]
    if kind == "bool_quota":
        k = att.value[1]
        flags = np.zeros(n, dtype=bool)
        flags[rng.permutation(n)[:k]] = True
        return flags.astype(float), [bool(f) for f in flags]
    if kind == "linear":
        _, coefs, intercept, sigma = att.value
        noise = rng.standard_normal(n) * sigma if sigma else np.zeros(n)
        col = np.full(n, float(intercept)) + noise
        for var, coef in coefs:
            if var not in columns:
                raise CohortSpecError(f"{att.variable!r} depends on unknown {var!r}")
            col = col + coef * columns[var]
        return col, [float(v) for v in col]
    raise CohortSpecError(f"unknown value rule {att.value!r}")


def _presence(att: Attachment, n: int, rng, columns, presence) -> np.ndarray:
    kind = att.present[0]
    if kind == "always":
        return np.ones(n, dtype=bool)
    if kind == "quota":
        k = att.present[1]
        out = np.zeros(n, dtype=bool)
        out[rng.permutation(n)[:k]] = True
        return out
    if kind == "prob":
        return rng.random(n) < att.present[1]
    if kind == "prob_by_presence":
        _, var, p_present, p_absent = att.present
        if var not in presence:
            raise CohortSpecError(f"{att.variable!r} conditions on unknown {var!r}")
        p = np.where(presence[var], p_present, p_absent)
        return rng.random(n) < p
    if kind == "prob_by":
        _, var, table = att.present
        if var not in columns:
            raise CohortSpecError(f"{att.variable!r} conditions on unknown {var!r}")
        lookup = dict(table)
        p = np.array([lookup[float(v)] for v in columns[var]])
        return rng.random(n) < p
    if kind == "prob_table":
        _, vars_, table = att.present
        lookup = {tuple(float(x) for x in key): p for key, p in table}
        p = np.empty(n)
        for i in range(n):
            key = tuple(float(columns[v][i]) for v in vars_)
            p[i] = lookup[key]
        return rng.random(n) < p
    if kind == "iff":
        var = att.present[1]
        if var not in columns:
            raise CohortSpecError(f"{att.variable!r} conditions on unknown {var!r}")
        return presence[var] & (columns[var] != 0.0)
    raise CohortSpecError(f"unknown presence rule {att.present!r}")


def generate_cohort(spec: CohortSpec):
    """Build the graph for a cohort spec.

    Returns (graph, columns, presence) where columns maps each attachment
    variable to its full numeric value array and presence to its boolean
    presence array, both over all n units.
    """
    g = PropertyGraph()
    person_ids = []
    for i in range(spec.n):
        pid = f"p{i:05d}"
        g.apply_update(AddNode(labels=("Person",),
                               props={"name": f"Person {i:05d}"}, id=pid))
        person_ids.append(pid)

    columns: dict[str, np.ndarray] = {}
    presence: dict[str, np.ndarray] = {}
    for idx, att in enumerate(spec.attachments):
        if att.variable in columns:
            raise CohortSpecError(f"duplicate attachment variable {att.variable!r}")
        rng_value = np.random.default_rng([spec.seed, idx, 1])
        rng_presence = np.random.default_rng([spec.seed, idx, 2])
        col, raw = _values(att, spec.n, rng_value, columns)
        here = _presence(att, spec.n, rng_presence, columns, presence)
        # downstream rules see the value when present, 0.0 when absent
        columns[att.variable] = np.where(here, col, 0.0)
        presence[att.variable] = here

        if att.shape == "person_prop":
            if att.value_prop is None:
                raise CohortSpecError(f"{att.variable!r} needs a value_prop")
            for i in range(spec.n):
                if not here[i]:
                    continue
                g.apply_update(SetNodeProperty(person_ids[i], att.value_prop, raw[i]))
            continue

        if att.shape not in ("habit", "condition"):
            raise CohortSpecError(f"unknown attachment shape {att.shape!r}")
        label = "Habit" if att.shape == "habit" else "Condition"
        edge_type = HABIT_EDGE if att.shape == "habit" else CONDITION_EDGE
        for i in range(spec.n):
            if not here[i]:
                continue
            props = dict(att.node_props)
            if att.value_prop is not None:
                props[att.value_prop] = raw[i]
            nid = f"p{i:05d}x{idx}"
            g.apply_update(AddNode(labels=(label,), props=props, id=nid))
            g.apply_update(AddEdge(type=edge_type, src=person_ids[i], dst=nid,
                                   props={}, id=f"p{i:05d}e{idx}"))
    return g, columns, presence


# --- bundled examples -----------------------------------------------------------

def ali_graph() -> PropertyGraph:
    """One person with two habits and two conditions; the smallest useful graph."""
    g = PropertyGraph()
    g.apply_update(AddNode(labels=("Person",), props={"name": "Ali"}, id="p0"))
    g.apply_update(AddNode(labels=("Habit",),
                           props={"name": "Cigarettes", "freq": 10}, id="p0h0"))
    g.apply_update(AddNode(labels=("Habit",),
                           props={"name": "Alcohol", "freq": 2}, id="p0h1"))
    g.apply_update(AddNode(labels=("Condition",),
                           props={"name": "COPD", "severity": 2}, id="p0c2"))
    g.apply_update(AddNode(labels=("Condition",),
                           props={"name": "Heart Disease"}, id="p0c3"))
    g.apply_update(AddEdge(type=HABIT_EDGE, src="p0", dst="p0h0", props={}, id="e0"))
    g.apply_update(AddEdge(type=HABIT_EDGE, src="p0", dst="p0h1", props={}, id="e1"))
    g.apply_update(AddEdge(type=CONDITION_EDGE, src="p0", dst="p0c2", props={}, id="e2"))
    g.apply_update(AddEdge(type=CONDITION_EDGE, src="p0", dst="p0c3", props={}, id="e3"))
    return g


def cohort100_spec() -> CohortSpec:
    """A hundred people; smoking drives COPD and heart disease prevalence."""
    return CohortSpec(n=100, seed=7, attachments=(
        Attachment("SMOKING", "habit",
                   node_props=(("name", "Cigarettes"),), value_prop="freq",
                   value=("choice", (2, 5, 10), (0.3, 0.4, 0.3)),
                   present=("quota", 40)),
        Attachment("DRINKING", "habit",
                   node_props=(("name", "Alcohol"),), value_prop="freq",
                   value=("choice", (1, 3, 7), (0.5, 0.3, 0.2)),
                   present=("prob", 0.5)),
        Attachment("COPD", "condition",
                   node_props=(("name", "COPD"),), value_prop="severity",
                   value=("choice", (1, 2, 3), (0.5, 0.3, 0.2)),
                   present=("prob_by_presence", "SMOKING", 0.6, 0.1)),
        Attachment("HEART DISEASE", "condition",
                   node_props=(("name", "Heart Disease"),), value_prop="severity",
                   value=("choice", (1, 2, 3), (0.6, 0.3, 0.1)),
                   present=("prob_by_presence", "SMOKING", 0.5, 0.15)),
        Attachment("AGE", "person_prop", value_prop="age",
                   value=("choice", (30, 45, 60, 75), (0.3, 0.3, 0.25, 0.15))),
    ))


def cohort100_graph() -> PropertyGraph:
    g, _, _ = generate_cohort(cohort100_spec())
    return g


DEMO_QUERIES = (
    'MATCH (p:Person)-[:HAS_HABIT]->(h:Habit {name: "Cigarettes"}) EXTRACT (p:SMOKING)',
    'MATCH (p:Person)-[:HAS_CONDITION]->(c:Condition {name: "COPD"}) EXTRACT (p:COPD)',
    'MATCH (p:Person)-[:HAS_CONDITION]->(c:Condition {name: "Heart Disease"}) '
    'EXTRACT (p:`HEART DISEASE`)',
    'MATCH (p:Person)-[:HAS_CONDITION]->(c1:Condition), (p)-[:HAS_CONDITION]->(c2:Condition) '
    'WHERE c1.name <> c2.name EXTRACT (p:COMORBIDITY)',
    'MATCH (p:Person)-[:HAS_HABIT]->(:Habit {name: "Cigarettes"}), '
    '(p)-[:HAS_CONDITION]->(:Condition {name: "COPD"}) EXTRACT (p:SMOKING)-->(p:COPD)',
    'MATCH (p:Person)-[:HAS_HABIT]->(:Habit {name: "Cigarettes"}), '
    '(p)-[:HAS_CONDITION]->(:Condition {name: "Heart Disease"}) '
    'EXTRACT (p:SMOKING)-->(p:`HEART DISEASE`)',
    'MATCH (p:Person)-[:HAS_CONDITION]->(c1:Condition {name: "COPD"}), '
    '(p)-[:HAS_CONDITION]->(c2:Condition) WHERE c1.name <> c2.name '
    'EXTRACT (p:COPD)-->(p:COMORBIDITY)',
    'MATCH (p:Person)-[:HAS_CONDITION]->(c1:Condition {name: "Heart Disease"}), '
    '(p)-[:HAS_CONDITION]->(c2:Condition) WHERE c1.name <> c2.name '
    'EXTRACT (p:`HEART DISEASE`)-->(p:COMORBIDITY)',
)


def demo_model(snapshot) -> CDAH:
    """Four variables over the cohort graph, estimated and value-ruled."""
    from .query.engine import evaluate

    model = None
    for text in DEMO_QUERIES:
        result = evaluate(text, snapshot, model)
        model = result.cdah
    model = model.set_value_rule("SMOKING", ValueRule(prop="freq"))
    model = model.set_value_rule("COPD", ValueRule(prop="severity"))
    model = model.set_value_rule("HEART DISEASE", ValueRule(prop="severity"))
    return estimate_all(model, snapshot)


def exact_overlap_spec() -> CohortSpec:
    """Everyone has the habit row; 40 are active and exactly those 40 carry
    the condition. Gives a fully determined 2x2 table."""
    return CohortSpec(n=100, seed=11, attachments=(
        Attachment("SMOKING", "habit",
                   node_props=(("name", "Cigarettes"),), value_prop="active",
                   value=("bool_quota", 40), present=("always",)),
        Attachment("HEART DISEASE", "condition",
                   node_props=(("name", "Heart Disease"),),
                   present=("iff", "SMOKING")),
    ))


def independence_spec(n: int = 10_000, seed: int = 42) -> CohortSpec:
    """Two unrelated boolean variables over the same population."""
    return CohortSpec(n=n, seed=seed, attachments=(
        Attachment("SMOKING", "habit",
                   node_props=(("name", "Cigarettes"),), value_prop="active",
                   value=("bool_prob", 0.3), present=("always",)),
        Attachment("TEA", "habit",
                   node_props=(("name", "Tea"),), value_prop="active",
                   value=("bool_prob", 0.5), present=("always",)),
    ))


def linear_spec(n: int = 10_000, seed: int = 42, sigma: float = 1.0) -> CohortSpec:
    """Continuous response: COPD = 0.3 * SMOKING + noise."""
    return CohortSpec(n=n, seed=seed, attachments=(
        Attachment("SMOKING", "habit",
                   node_props=(("name", "Cigarettes"),), value_prop="freq",
                   value=("choice", (0, 1, 2, 3, 4, 5, 6, 7, 8, 9),
                          tuple([0.1] * 10)),
                   present=("always",)),
        Attachment("COPD", "condition",
                   node_props=(("name", "COPD"),), value_prop="load",
                   value=("linear", (("SMOKING", 0.3),), 0.0, sigma),
                   present=("always",)),
    ))


def exogenous_spec(n: int = 2_000, seed: int = 5) -> CohortSpec:
    """Smoking has no cause in the cohort, disease depends on it alone."""
    return CohortSpec(n=n, seed=seed, attachments=(
        Attachment("SMOKING", "habit",
                   node_props=(("name", "Cigarettes"),), value_prop="active",
                   value=("bool_prob", 0.4), present=("always",)),
        Attachment("DISEASE", "condition",
                   node_props=(("name", "Disease"),),
                   present=("prob_table", ("SMOKING",),
                            (((1.0,), 0.7), ((0.0,), 0.2)))),
    ))


def confounded_spec(n: int = 2_000, seed: int = 5) -> CohortSpec:
    """Age drives both smoking and disease; smoking also drives disease.

    Smokers skew young while disease skews old, so the marginal P(disease |
    smoking) understates the effect and adjusting for AGE moves the cells.
    """
    p_table = []
    for s in (0.0, 1.0):
        for a in (0.0, 1.0, 2.0):
            base = 0.5 if s else 0.05
            p_table.append(((s, a), base + 0.2 * a))
    return CohortSpec(n=n, seed=seed, attachments=(
        Attachment("AGE", "person_prop", value_prop="age_band",
                   value=("choice", (0, 1, 2), (0.4, 0.35, 0.25))),
        Attachment("SMOKING", "habit",
                   node_props=(("name", "Cigarettes"),), value_prop="active",
                   value=("bool_by", "AGE", ((0.0, 0.8), (1.0, 0.4), (2.0, 0.1))),
                   present=("always",)),
        Attachment("DISEASE", "condition",
                   node_props=(("name", "Disease"),),
                   present=("prob_table", ("SMOKING", "AGE"), tuple(p_table))),
    ))


def random_cohort_spec(seed: int) -> CohortSpec:
    """A small randomized two-variable cohort, for estimator cross-checks.

    Shapes vary with the seed: categorical or boolean exposure, optional
    partial presence on both sides, valued or membership-only response.
    """
    rng = random.Random(seed)
    n = rng.randint(20, 200)
    if rng.random() < 0.5:
        cats = tuple(range(2, 2 + rng.randint(2, 4)))
        weights = [rng.random() + 0.1 for _ in cats]
        total = sum(weights)
        x_value = ("choice", cats, tuple(w / total for w in weights))
    else:
        x_value = ("bool_prob", rng.uniform(0.2, 0.8))
    x_present = ("always",) if rng.random() < 0.5 else ("prob", rng.uniform(0.3, 0.9))
    y_value = ("choice", (1, 2, 3), (0.5, 0.3, 0.2)) if rng.random() < 0.5 else None
    return CohortSpec(n=n, seed=seed, attachments=(
        Attachment("SMOKING", "habit", node_props=(("name", "Cigarettes"),),
                   value_prop="freq", value=x_value, present=x_present),
        Attachment("DISEASE", "condition", node_props=(("name", "Disease"),),
                   value_prop="severity" if y_value else None, value=y_value,
                   present=("prob_by_presence", "SMOKING",
                            rng.uniform(0.3, 0.9), rng.uniform(0.05, 0.5))),
    ))


def random_pair_model(seed: int):
    """(snapshot, model) for one random cohort, values surfaced when present."""
    spec = random_cohort_spec(seed)
    graph, _, _ = generate_cohort(spec)
    snap = graph.snapshot()
    rules: dict[str, ValueRule] = {}
    for att in spec.attachments:
        if att.value is not None and att.value_prop:
            rules[att.variable] = ValueRule(prop=att.value_prop)
    model = build_pair_model(
        snap, "SMOKING", "DISEASE",
        'MATCH (p:Person)-[:HAS_HABIT]->(h:Habit {name: "Cigarettes"}) '
        "EXTRACT (p:SMOKING)",
        'MATCH (p:Person)-[:HAS_CONDITION]->(c:Condition {name: "Disease"}) '
        "EXTRACT (p:DISEASE)",
        value_rules=rules)
    return snap, model


def build_pair_model(snapshot, x: str, y: str, x_query: str, y_query: str,
                     value_rules: dict[str, ValueRule] | None = None,
                     extra_edges: tuple[tuple[str, str], ...] = ()) -> CDAH:
    """Extract two variables, wire x -> y plus extras, estimate everything."""
    from .query.engine import evaluate

    model = evaluate(x_query, snapshot, None).cdah
    model = evaluate(y_query, snapshot, model).cdah
    for var, rule in (value_rules or {}).items():
        model = model.set_value_rule(var, rule)
    model = model.add_causal_edge(x, y)
    for s, d in extra_edges:
        model = model.add_causal_edge(s, d)
    return estimate_all(model, snapshot)


def main(argv=None) -> int:
    """Write the bundled fixture files: ali.jsonl, cohort100.jsonl,
    demo_model.json."""
    import os

    from .cdah import save_cdah

    args = sys.argv[1:] if argv is None else argv
    out_dir = args[0] if args else "fixtures"
    os.makedirs(out_dir, exist_ok=True)
    export(ali_graph(), os.path.join(out_dir, "ali.jsonl"))
    cohort = cohort100_graph()
    export(cohort, os.path.join(out_dir, "cohort100.jsonl"))
    save_cdah(demo_model(cohort.snapshot()), os.path.join(out_dir, "demo_model.json"))
    print(f"wrote ali.jsonl, cohort100.jsonl, demo_model.json to {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
