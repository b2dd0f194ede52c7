"""Merging causal models from multiple sources into one model.

Each input model carries a source name. Distributions on shared edges are
pooled by support weight (w_i = n_i / sum n_j), member anchors are namespaced
"source:anchor" so units never collide, and the merged model keeps no backing
snapshot: it is a transportable summary, not a grounded extraction.

Equations merge only in the safe case: every contributed equation linear over
the same parents. Anything else is dropped and reported rather than silently
averaged into nonsense.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .analysis import find_colliders, find_confounders, find_mediators
from .cdah import CDAH, CausalEdge, Distribution, HyperNode, Member, label_sort_key
from .equations import EBin, ENeg, EVar, StructuralEquation, parse_equation, quote_name
from .errors import AlignmentConflictError, MergeCycleError

RENORM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class AlignmentRule:
    """How one source variable maps into the merged namespace.

    ``to=None`` drops the variable (and everything hanging off it).
    """
    source: str
    variable: str
    to: str | None


@dataclass
class MergeReport:
    sources: list[str] = field(default_factory=list)
    renamed: list[tuple[str, str, str]] = field(default_factory=list)      # source, old, new
    removed_variables: list[tuple[str, str]] = field(default_factory=list)  # source, variable
    weights: dict = field(default_factory=dict)        # (src, dst) -> {source: weight}
    uniform_weight_edges: list = field(default_factory=list)
    averaged_ipd_edges: list = field(default_factory=list)
    dropped_equations: list[tuple[str, str]] = field(default_factory=list)  # variable, reason
    merged_equations: list[str] = field(default_factory=list)
    dropped_edges: list[tuple[str, str, str]] = field(default_factory=list)  # src, dst, reason
    warnings: list[str] = field(default_factory=list)


def _rename_expr(expr, mapping: dict[str, str]):
    if isinstance(expr, EVar):
        return EVar(mapping.get(expr.name, expr.name))
    if isinstance(expr, EBin):
        return EBin(expr.op, _rename_expr(expr.left, mapping),
                    _rename_expr(expr.right, mapping))
    if isinstance(expr, ENeg):
        return ENeg(_rename_expr(expr.operand, mapping))
    return expr  # ENum, ENoise


def _rename_equation(eq: StructuralEquation, target: str,
                     mapping: dict[str, str]) -> StructuralEquation:
    expr = _rename_expr(eq.expr, mapping)
    text = f"{quote_name(target)} = {expr}"
    renamed = parse_equation(text)
    return StructuralEquation(target=renamed.target, expr=renamed.expr,
                              text=renamed.text, parents=renamed.parents,
                              residual_sigma=eq.residual_sigma)


def _apply_alignment(model: CDAH, rules: dict[str, str | None],
                     report: MergeReport) -> CDAH:
    """Rename / drop variables of one source model before pooling."""
    source = model.source
    mapping: dict[str, str] = {}
    dropped: set[str] = set()
    for old in sorted(model.variables):
        if old in rules:
            new = rules[old]
            if new is None:
                dropped.add(old)
                report.removed_variables.append((source, old))
            else:
                mapping[old] = new
                if new != old:
                    report.renamed.append((source, old, new))
        else:
            mapping[old] = old
    targets = list(mapping.values())
    if len(set(targets)) != len(targets):
        raise AlignmentConflictError(
            f"alignment for source {source!r} maps two variables to one name")

    variables = {}
    for old, node in model.variables.items():
        if old in dropped:
            continue
        new = mapping[old]
        equation = node.equation
        if equation is not None:
            if any(p in dropped for p in equation.parents):
                report.dropped_equations.append(
                    (new, f"source {source!r}: a parent was dropped by alignment"))
                equation = None
            elif new != old or any(mapping.get(p, p) != p for p in equation.parents):
                equation = _rename_equation(equation, new, mapping)
        variables[new] = HyperNode(variable=new, members=node.members,
                                   value_rule=node.value_rule, equation=equation)

    edges = {}
    for (s, d), edge in model.edges.items():
        if s in dropped or d in dropped:
            continue
        ns, nd = mapping[s], mapping[d]
        edges[(ns, nd)] = replace(edge, src=ns, dst=nd)
    origins = tuple((mapping[v], q) for v, q in model.origins if v not in dropped)
    return replace(model, variables=variables, edges=edges, origins=origins)


def _namespace_members(source: str, node: HyperNode) -> HyperNode:
    members = tuple(
        Member(anchor=f"{source}:{m.anchor}",
               nodes=frozenset(f"{source}:{i}" for i in m.nodes),
               edges=frozenset(f"{source}:{i}" for i in m.edges))
        for m in node.members
    )
    return replace(node, members=members)


def _pool_distributions(parts: list[tuple[str, float, Distribution]],
                        warnings: list[str], what: str):
    """Support-weighted mixture of conditional tables with domain union.

    ``parts`` is (source, weight, table), already sorted by source name so the
    result is invariant to input order. Rows missing from a source are
    reweighted over the sources that do carry them.
    """
    given = sorted({g for _, _, d in parts for g in d.given_domain}, key=label_sort_key)
    out = sorted({o for _, _, d in parts for o in d.out_domain}, key=label_sort_key)
    rows = []
    counts = []
    for g in given:
        carriers = [(w, d) for _, w, d in parts if g in d.given_domain]
        total_w = sum(w for w, _ in carriers)
        cells = {}
        for o in out:
            acc = 0.0
            for w, d in carriers:
                r = d.row(g)
                acc += w * r.get(o, 0.0)
            cells[o] = acc / total_w if total_w > 0 else 0.0
        if total_w == 0.0:
            warnings.append(f"{what}: no source carries weight for row {g!r}")
        drift = abs(sum(cells.values()) - 1.0)
        if drift > RENORM_TOLERANCE:
            scale = sum(cells.values())
            if scale > 0:
                cells = {o: v / scale for o, v in cells.items()}
                warnings.append(f"{what}: row {g!r} renormalized (drift {drift:.3g})")
        rows.append(tuple(cells[o] for o in out))
        counts.append(sum(
            d.row_counts[d.given_domain.index(g)]
            for _, _, d in parts if g in d.given_domain))
    return Distribution(parts[0][2].kind, tuple(given), tuple(out),
                        tuple(rows), tuple(counts))


def _merge_equations(variable: str, contributions: list[tuple[str, int, StructuralEquation]],
                     report: MergeReport) -> StructuralEquation | None:
    """Member-count weighted average of linear equations over equal parents."""
    if not contributions:
        return None
    forms = []
    for source, count, eq in contributions:
        lin = eq.linear_form()
        if lin is None:
            report.dropped_equations.append(
                (variable, f"source {source!r} contributed a non-linear equation"))
            return None
        forms.append((source, count, lin))
    parent_sets = {tuple(sorted(coefs)) for _, _, (_, coefs) in forms}
    if len(parent_sets) != 1:
        report.dropped_equations.append(
            (variable, "sources disagree on the parents of the equation"))
        return None
    total = sum(count for _, count, _ in forms)
    if total == 0:
        report.dropped_equations.append(
            (variable, "no member support to weight the equation average"))
        return None
    parents = sorted(next(iter(parent_sets)))
    intercept = sum(count / total * lin[0] for _, count, lin in forms)
    coefficients = {
        p: sum(count / total * lin[1][p] for _, count, lin in forms)
        for p in parents
    }
    sigmas = [eq.residual_sigma for _, _, eq in contributions if eq.residual_sigma is not None]
    weights = [count / total for _, count, eq in contributions
               if eq.residual_sigma is not None]
    sigma = sum(w * s for w, s in zip(weights, sigmas)) / sum(weights) if sigmas else None

    parts = [repr(float(intercept))]
    for p in parents:
        parts.append(f"{float(coefficients[p])!r}*{quote_name(p)}")
    text = f"{quote_name(variable)} = " + " + ".join(parts) + " + eps"
    merged = parse_equation(text)
    merged = StructuralEquation(target=merged.target, expr=merged.expr,
                                text=merged.text, parents=merged.parents,
                                residual_sigma=sigma)
    report.merged_equations.append(variable)
    return merged


def merge(models: list[CDAH], alignment: list[AlignmentRule] | None = None, *,
          cycle_policy: str = "reject") -> tuple[CDAH, MergeReport]:
    """Pool several source models into one merged model.

    ``cycle_policy`` is "reject" (raise on a merged cycle) or
    "drop_min_support" (iteratively drop the weakest edge of each cycle).
    """
    if len(models) < 2:
        raise AlignmentConflictError("merging needs at least two models")
    if cycle_policy not in ("reject", "drop_min_support"):
        raise ValueError(f"unknown cycle policy {cycle_policy!r}")
    report = MergeReport()

    named = []
    for i, m in enumerate(models):
        source = m.source if m.source is not None else f"source{i}"
        if m.source is None:
            report.warnings.append(f"model {i} has no source name; using {source!r}")
            m = replace(m, source=source)
        named.append(m)
    names = [m.source for m in named]
    if len(set(names)) != len(names):
        raise AlignmentConflictError(f"duplicate source names: {sorted(names)}")
    named.sort(key=lambda m: m.source)
    report.sources = [m.source for m in named]

    rules_by_source: dict[str, dict[str, str | None]] = {}
    for rule in alignment or ():
        rules_by_source.setdefault(rule.source, {})
        if rule.variable in rules_by_source[rule.source]:
            raise AlignmentConflictError(
                f"two alignment rules for {rule.source!r}:{rule.variable!r}")
        rules_by_source[rule.source][rule.variable] = rule.to
    for source in rules_by_source:
        if source not in report.sources:
            raise AlignmentConflictError(f"alignment names unknown source {source!r}")

    aligned = [_apply_alignment(m, rules_by_source.get(m.source, {}), report)
               for m in named]

    # variables: union, with namespaced members and pooled equations
    variables: dict[str, HyperNode] = {}
    all_names = sorted({v for m in aligned for v in m.variables})
    for name in all_names:
        members: list[Member] = []
        value_rule = None
        rule_owner = None
        eq_parts: list[tuple[str, int, StructuralEquation]] = []
        for m in aligned:
            node = m.variables.get(name)
            if node is None:
                continue
            spaced = _namespace_members(m.source, node)
            members.extend(spaced.members)
            if node.value_rule is not None:
                if value_rule is None:
                    value_rule = node.value_rule
                    rule_owner = m.source
                elif value_rule != node.value_rule:
                    raise AlignmentConflictError(
                        f"{name!r}: value rules differ between {rule_owner!r} "
                        f"and {m.source!r}")
            if node.equation is not None:
                eq_parts.append((m.source, len(node.members), node.equation))
        equation = _merge_equations(name, eq_parts, report)
        variables[name] = HyperNode(variable=name, members=tuple(members),
                                    value_rule=value_rule, equation=equation)

    # edges: union with support-weighted pooling
    edges: dict[tuple[str, str], CausalEdge] = {}
    all_edges = sorted({k for m in aligned for k in m.edges})
    for key in all_edges:
        contributors = [(m.source, m.edges[key]) for m in aligned if key in m.edges]
        supports = {source: e.support for source, e in contributors}
        total = sum(supports.values())
        if total == 0:
            weights = {source: 1.0 / len(contributors) for source, _ in contributors}
            report.uniform_weight_edges.append(key)
            report.warnings.append(
                f"edge {key[0]} -> {key[1]}: no support anywhere, weights uniform")
        else:
            weights = {source: supports[source] / total for source, _ in contributors}
        report.weights[key] = dict(weights)

        cpd_parts = [(source, weights[source], e.cpd)
                     for source, e in contributors if e.cpd is not None]
        cpd = None
        if cpd_parts:
            if len(cpd_parts) < len(contributors):
                report.warnings.append(
                    f"edge {key[0]} -> {key[1]}: only "
                    f"{len(cpd_parts)}/{len(contributors)} sources carry a table")
            part_total = sum(w for _, w, _ in cpd_parts)
            scaled = [(s, w / part_total, d) for s, w, d in cpd_parts]
            cpd = _pool_distributions(scaled, report.warnings,
                                      f"cpd {key[0]} -> {key[1]}")
        ipd_parts = [(source, weights[source], e.ipd)
                     for source, e in contributors if e.ipd is not None]
        ipd = None
        if ipd_parts:
            part_total = sum(w for _, w, _ in ipd_parts)
            scaled = [(s, w / part_total, d) for s, w, d in ipd_parts]
            ipd = _pool_distributions(scaled, report.warnings,
                                      f"ipd {key[0]} -> {key[1]}")
            report.averaged_ipd_edges.append(key)
        edges[key] = CausalEdge(src=key[0], dst=key[1], support=total,
                                cpd=cpd, ipd=ipd)

    merged = CDAH(variables=variables, edges=edges, origins=(), over=None, source=None)

    cycle = merged.find_cycle()
    while cycle is not None:
        if cycle_policy == "reject":
            raise MergeCycleError(
                f"merged graph has a cycle: {' -> '.join(cycle)}", witness=cycle)
        candidates = sorted(
            ((merged.edges[(cycle[i], cycle[i + 1])].support, cycle[i], cycle[i + 1])
             for i in range(len(cycle) - 1)),
        )
        support, s, d = candidates[0]
        merged = merged.drop_edge(s, d)
        report.dropped_edges.append((s, d, f"cycle break, support {support}"))
        cycle = merged.find_cycle()

    return merged, report


# --- role comparison ------------------------------------------------------------

@dataclass(frozen=True)
class RoleChange:
    role: str        # "confounder" | "collider" | "mediator"
    variable: str
    x: str
    y: str


def structural_roles(cdah: CDAH) -> set[RoleChange]:
    """Every (role, variable, pair) fact the graph supports."""
    names = sorted(cdah.variables)
    out: set[RoleChange] = set()
    for i, x in enumerate(names):
        for y in names[i + 1:]:
            for c in find_confounders(cdah, x, y):
                out.add(RoleChange("confounder", c, x, y))
            for c in find_colliders(cdah, x, y):
                out.add(RoleChange("collider", c, x, y))
            for m in find_mediators(cdah, x, y):
                out.add(RoleChange("mediator", m.variable, x, y))
            for m in find_mediators(cdah, y, x):
                out.add(RoleChange("mediator", m.variable, y, x))
    return out


@dataclass
class RoleDiff:
    gained: list[RoleChange]
    lost: list[RoleChange]


def diff_roles(before: CDAH, after: CDAH) -> RoleDiff:
    """Role facts that appear or disappear between two models."""
    b = structural_roles(before)
    a = structural_roles(after)
    key = lambda r: (r.role, r.variable, r.x, r.y)
    return RoleDiff(gained=sorted(a - b, key=key), lost=sorted(b - a, key=key))


def transport_check(models: list[CDAH],
                    alignment: list[AlignmentRule] | None = None) -> list[str]:
    """Dry-run validation of a merge; returns the problems found."""
    problems = []
    try:
        merge(models, alignment, cycle_policy="reject")
    except (AlignmentConflictError, MergeCycleError) as err:
        problems.append(str(err))
    return problems
