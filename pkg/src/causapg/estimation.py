"""Conditional-probability estimation for causal variables over a snapshot.

Counting conventions, used consistently by the query operators and the
maintenance layer:

- the universe for a pair (X, Y) is the union of their anchor sets; a unit
  outside a variable's membership contributes the "absent" category
- row counts are per given-category unit counts, so a probability cell is
  count(x and y) / count(x)
- support is the number of units where both variables are non-absent
- domains are the observed categories, sorted numbers-first
"""

from __future__ import annotations

from .cdah import ABSENT, CDAH, CausalEdge, Distribution, label_sort_key
from .errors import UnknownVariableError, UnsupportedConditionError


def unit_label_map(cdah: CDAH, variable: str, snapshot=None) -> dict[str, str]:
    """Anchor id -> category label for one variable."""
    return cdah.unit_labels(variable, snapshot)


def _require_variable(cdah: CDAH, name: str):
    if name not in cdah.variables:
        raise UnknownVariableError(f"unknown causal variable {name!r}")


def estimate_cpd(cdah: CDAH, src: str, dst: str, snapshot=None) -> tuple[Distribution, int]:
    """Estimate P(dst | src) from the grounded units.

    Returns the distribution and its support (units where both variables
    take a non-absent value). Zero-count given rows cannot occur because
    domains are observed categories.
    """
    _require_variable(cdah, src)
    _require_variable(cdah, dst)
    x_labels = cdah.unit_labels(src, snapshot)
    y_labels = cdah.unit_labels(dst, snapshot)
    universe = sorted(set(x_labels) | set(y_labels))

    joint: dict[tuple[str, str], int] = {}
    for unit in universe:
        x = x_labels.get(unit, ABSENT)
        y = y_labels.get(unit, ABSENT)
        joint[(x, y)] = joint.get((x, y), 0) + 1

    given_domain = sorted({x for x, _ in joint}, key=label_sort_key)
    out_domain = sorted({y for _, y in joint}, key=label_sort_key)
    row_counts = tuple(
        sum(joint.get((x, y), 0) for y in out_domain) for x in given_domain
    )
    rows = tuple(
        tuple(joint.get((x, y), 0) / count for y in out_domain) if count else
        tuple(0.0 for _ in out_domain)
        for x, count in zip(given_domain, row_counts)
    )
    support = sum(
        c for (x, y), c in joint.items() if x != ABSENT and y != ABSENT
    )
    dist = Distribution("cpd", tuple(given_domain), tuple(out_domain), rows, row_counts)
    return dist, support


def estimate_edge(cdah: CDAH, src: str, dst: str, snapshot=None) -> CDAH:
    """Install a fresh CPD and support on one causal edge."""
    edge = cdah.edge(src, dst)
    dist, support = estimate_cpd(cdah, src, dst, snapshot)
    return cdah.set_edge(CausalEdge(src=src, dst=dst, support=support,
                                    cpd=dist, ipd=edge.ipd))


def estimate_all(cdah: CDAH, snapshot=None) -> CDAH:
    """Install fresh CPDs on every causal edge, in deterministic order."""
    for src, dst in sorted(cdah.edges):
        cdah = estimate_edge(cdah, src, dst, snapshot)
    return cdah


def eval_probability(cdah: CDAH, snapshot, target: tuple[str, str | None],
                     conditions: tuple[tuple[str, str | None], ...] = ()):
    """Evaluate a PROBABILITY(...) request against grounded data.

    Shapes:
    - target valued, all conditions valued -> float
    - target unvalued, all conditions valued -> {label: float}
    - target unvalued, exactly one unvalued condition -> full Distribution
    Anything else is rejected.
    """
    t_var, t_value = target
    _require_variable(cdah, t_var)
    for c_var, _ in conditions:
        _require_variable(cdah, c_var)

    unvalued = [c for c, v in conditions if v is None]
    if unvalued:
        if len(conditions) == 1 and t_value is None:
            dist, _ = estimate_cpd(cdah, conditions[0][0], t_var, snapshot)
            return dist
        raise UnsupportedConditionError(
            "conditions need explicit values unless the whole table P(Y | X) is requested")

    t_labels = cdah.unit_labels(t_var, snapshot)
    cond_labels = [(var, cdah.unit_labels(var, snapshot)) for var, _ in conditions]

    if not conditions:
        universe = sorted(t_labels)
        if not universe:
            raise UnsupportedConditionError(f"{t_var!r} has no grounded units")
        units = universe
        denom = len(units)
    else:
        universe = set(t_labels)
        for _, labels in cond_labels:
            universe |= set(labels)
        units = []
        for unit in sorted(universe):
            ok = True
            for (var, labels), (_, wanted) in zip(cond_labels, conditions):
                if labels.get(unit, ABSENT) != wanted:
                    ok = False
                    break
            if ok:
                units.append(unit)
        denom = len(units)
        if denom == 0:
            shown = ", ".join(f"{var}={value}" for var, value in conditions)
            raise UnsupportedConditionError(f"no grounded units satisfy {shown}")

    if t_value is not None:
        hits = sum(1 for u in units if t_labels.get(u, ABSENT) == t_value)
        return hits / denom

    domain = sorted({t_labels.get(u, ABSENT) for u in (universe if conditions else units)},
                    key=label_sort_key)
    counts = {label: 0 for label in domain}
    for u in units:
        counts[t_labels.get(u, ABSENT)] += 1
    return {label: counts[label] / denom for label in domain}
