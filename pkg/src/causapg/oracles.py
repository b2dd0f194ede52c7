"""Slow reference implementations used by the test suite.

Everything here recomputes results from first principles with naive
algorithms (trail enumeration, double-loop counting, normal equations) so
the fast engine code can be checked against an independent answer. Nothing
in the package proper may import this module.
"""

from __future__ import annotations

import itertools

import numpy as np

from .cdah import ABSENT, CDAH, Member


# --- separation -----------------------------------------------------------------

def _descendant_closure(edges) -> dict:
    """node -> set of nodes reachable by directed edges (including itself)."""
    children: dict = {}
    nodes = set()
    for s, d in edges:
        children.setdefault(s, set()).add(d)
        nodes.add(s)
        nodes.add(d)
    out = {}
    for start in nodes:
        seen = {start}
        stack = [start]
        while stack:
            cur = stack.pop()
            for nxt in children.get(cur, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        out[start] = seen
    return out

def oracle_dsep(nodes, edges, x: str, y: str, given=()) -> bool:
    """Textbook d-separation: enumerate every simple undirected trail from x
    to y and check each for blocking. Exponential, fine for tiny graphs."""
    given = set(given)
    edge_set = {(s, d) for (s, d) in edges}
    neighbors: dict = {n: set() for n in nodes}
    for s, d in edge_set:
        neighbors.setdefault(s, set()).add(d)
        neighbors.setdefault(d, set()).add(s)
    desc = _descendant_closure(edge_set)

    def trail_active(trail) -> bool:
        for i in range(1, len(trail) - 1):
            prev, node, nxt = trail[i - 1], trail[i], trail[i + 1]
            collider = (prev, node) in edge_set and (nxt, node) in edge_set
            if collider:
                reachable = desc.get(node, {node})
                if not (reachable & given):
                    return False
            elif node in given:
                return False
        return True

    def walk(trail):
        cur = trail[-1]
        if cur == y:
            return trail_active(trail)
        for nxt in sorted(neighbors.get(cur, ())):
            if nxt in trail:
                continue
            if walk(trail + [nxt]):
                return True
        return False

    return not walk([x])


def enumerate_dags(n: int):
    """All DAGs on n ordered nodes v0..v{n-1} with edges respecting the order.

    Every DAG shape appears (any DAG can be relabeled into topological
    order), so checks quantified over all ordered node pairs cover the full
    behavior space.
    """
    names = [f"v{i}" for i in range(n)]
    slots = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)]
    for mask in range(1 << len(slots)):
        yield names, tuple(s for i, s in enumerate(slots) if mask >> i & 1)


def random_dag(rng, n: int, p: float):
    """A random labeled DAG: random topological order, each forward edge
    kept with probability p."""
    order = list(rng.permutation(n))
    names = [f"n{i}" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((names[order[i]], names[order[j]]))
    return names, tuple(edges)


def model_from_dag(nodes, edges) -> CDAH:
    """A bare structural model (no members, no data) over the given DAG."""
    model = CDAH()
    for name in nodes:
        model = model.upsert_hypernode(name)
    for s, d in edges:
        model = model.add_causal_edge(s, d)
    return model


# --- counting -------------------------------------------------------------------

def unit_table(cdah: CDAH, variables, snapshot=None) -> dict:
    """anchor -> {variable: label} over the union universe, absent filled in."""
    maps = {v: cdah.unit_labels(v, snapshot) for v in variables}
    universe = sorted(set().union(*[set(m) for m in maps.values()]) if maps else set())
    return {u: {v: maps[v].get(u, ABSENT) for v in variables} for u in universe}


def oracle_cpd(cdah: CDAH, src: str, dst: str, snapshot=None):
    """Naive conditional table: probs[(x, y)], row counts, and support."""
    table = unit_table(cdah, (src, dst), snapshot)
    joint: dict = {}
    for row in table.values():
        key = (row[src], row[dst])
        joint[key] = joint.get(key, 0) + 1
    row_totals: dict = {}
    for (xv, _), c in joint.items():
        row_totals[xv] = row_totals.get(xv, 0) + c
    probs = {key: c / row_totals[key[0]] for key, c in joint.items()}
    support = sum(c for (xv, yv), c in joint.items()
                  if xv != ABSENT and yv != ABSENT)
    return probs, row_totals, support


def oracle_probability(cdah: CDAH, target, conditions=(), snapshot=None):
    """Naive P(target | conditions) by counting units one at a time.

    target and conditions are (variable, label) pairs. Returns None when no
    unit satisfies the conditions.
    """
    t_var, t_val = target
    vars_ = [t_var] + [v for v, _ in conditions]
    table = unit_table(cdah, vars_, snapshot)
    if conditions:
        pool = [row for row in table.values()
                if all(row[v] == val for v, val in conditions)]
    else:
        # unconditional universe is the variable's own anchors
        anchors = set(cdah.unit_labels(t_var, snapshot))
        pool = [row for u, row in table.items() if u in anchors]
    if not pool:
        return None
    hits = sum(1 for row in pool if row[t_var] == t_val)
    return hits / len(pool)


def oracle_contingency(pairs):
    """Chi-squared and Cramer's V from scratch for (a, b) label pairs."""
    a_vals = sorted({a for a, _ in pairs})
    b_vals = sorted({b for _, b in pairs})
    n = len(pairs)
    if n == 0 or len(a_vals) < 2 or len(b_vals) < 2:
        return 0.0, 0.0
    counts = {(a, b): 0 for a in a_vals for b in b_vals}
    for a, b in pairs:
        counts[(a, b)] += 1
    chi2 = 0.0
    for a in a_vals:
        ra = sum(counts[(a, b)] for b in b_vals)
        for b in b_vals:
            cb = sum(counts[(x, b)] for x in a_vals)
            expected = ra * cb / n
            if expected > 0:
                chi2 += (counts[(a, b)] - expected) ** 2 / expected
    v = (chi2 / (n * (min(len(a_vals), len(b_vals)) - 1))) ** 0.5
    return chi2, v


def oracle_ols(xs: np.ndarray, y: np.ndarray):
    """Least squares through the normal equations (a different route than
    the engine's lstsq). xs has one column per regressor, no intercept."""
    n = len(y)
    design = np.column_stack([np.ones(n), xs])
    beta = np.linalg.solve(design.T @ design, design.T @ y)
    residuals = y - design @ beta
    sigma = float(np.sqrt(np.mean(residuals ** 2)))
    return float(beta[0]), [float(b) for b in beta[1:]], sigma


# --- matching -------------------------------------------------------------------

def oracle_chain_matches(snapshot, slots, steps):
    """All slot bindings for a single linear pattern, by brute force.

    slots: (label or None, props dict) per node position. steps: ("out" or
    "in", edge type or None) between consecutive slots. Node semantics are
    homomorphic (slots may repeat nodes) but the edges backing the steps
    must be pairwise distinct; distinctness is checked by trying every
    assignment of concrete edges to steps. Returns a sorted list of node-id
    tuples.
    """
    def ok(node, label, props):
        if label is not None and label not in node.labels:
            return False
        return all(node.props.get(k) == v for k, v in props.items())

    all_nodes = [snapshot.node(i) for i in sorted(snapshot.nodes)]
    candidates = [[n.id for n in all_nodes if ok(n, lab, props)]
                  for lab, props in slots]
    out = []
    for combo in itertools.product(*candidates):
        options = []
        for i, (direction, etype) in enumerate(steps):
            here, there = combo[i], combo[i + 1]
            src, dst = (here, there) if direction == "out" else (there, here)
            ids = [e.id for e in snapshot.out_edges(src)
                   if e.dst == dst and (etype is None or e.type == etype)]
            if not ids:
                options = None
                break
            options.append(ids)
        if options is None:
            continue
        if _distinct_assignment(options, set()):
            out.append(combo)
    return sorted(set(out))


def _distinct_assignment(options, used) -> bool:
    if not options:
        return True
    for pick in options[0]:
        if pick in used:
            continue
        if _distinct_assignment(options[1:], used | {pick}):
            return True
    return False


def oracle_simple_paths(snapshot, src: str, dst: str):
    """Every simple directed path src -> dst as a node-id tuple, any type.
    At least one edge; no node repeats, so src -> src yields nothing."""
    out = []

    def walk(trail):
        for e in snapshot.out_edges(trail[-1]):
            if e.dst in trail:
                continue
            if e.dst == dst:
                out.append(tuple(trail + [e.dst]))
            else:
                walk(trail + [e.dst])

    walk([src])
    return sorted(set(out))


def member_for(anchor: str, nodes=(), edges=()) -> Member:
    """Shorthand for tests that build members by hand."""
    return Member(anchor=anchor, nodes=frozenset(nodes) or frozenset({anchor}),
                  edges=frozenset(edges))
