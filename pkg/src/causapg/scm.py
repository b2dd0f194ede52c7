"""Structural-equation machinery over the causal graph.

Equations are additive-noise: target = f(parents) + eps. That form makes
abduction exact (eps = observed - f(observed parents)) and keeps the
counterfactual pipeline a pure composition: abduct every noise term, sever
the intervened variables, evaluate in topological order.
"""

from __future__ import annotations

import numpy as np

from .analysis import d_separated_sets, descendants_of
from .cdah import ABSENT, CDAH, CausalEdge, Distribution, label_sort_key
from .equations import StructuralEquation, parse_equation, render_equation
from .errors import (
    InsufficientDataError,
    InvalidAdjustmentSetError,
    MissingEvidenceError,
    NonNumericVariableError,
    RankDeficiencyError,
    UncoveredSymbolError,
    UnknownVariableError,
)
from .estimation import estimate_cpd


def _require(cdah: CDAH, *names: str):
    for name in names:
        if name not in cdah.variables:
            raise UnknownVariableError(f"unknown causal variable {name!r}")


def numeric_label(variable: str, label: str) -> float:
    try:
        return float(label)
    except ValueError:
        raise NonNumericVariableError(
            f"{variable!r} has category {label!r}, which has no numeric reading; "
            "give the variable a numeric value rule first") from None


# --- evaluation under intervention --------------------------------------------

def do_values(cdah: CDAH, interventions: dict[str, float],
              noise: dict[str, float] | None = None) -> tuple[dict[str, float], list[str]]:
    """Evaluate every variable under do(interventions).

    Intervened variables are severed: they take the assigned value and their
    own equations are never evaluated. Variables without an equation pass
    their noise term through unchanged. When a ``noise`` map is given, any
    equation missing from it falls back to 0 and the fallback is flagged.
    """
    _require(cdah, *interventions)
    if noise:
        _require(cdah, *noise)
    flags: list[str] = []
    env: dict[str, float] = {}
    noise = noise if noise is not None else {}
    explicit_noise = bool(noise)
    for var in cdah.topological_order():
        if var in interventions:
            env[var] = float(interventions[var])
            continue
        eps = noise.get(var, 0.0)
        if explicit_noise and var not in noise:
            flags.append(f"noise for {var} defaulted to 0")
        eq = cdah.hypernode(var).equation
        if eq is None:
            env[var] = float(eps)
            if not explicit_noise:
                flags.append(f"{var} has no structural equation; evaluated as its noise term")
            continue
        parent_env = {}
        for p in eq.parents:
            if p not in env:
                raise UncoveredSymbolError(
                    f"equation for {var} references {p!r}, which has no value yet")
            parent_env[p] = env[p]
        env[var] = eq.value(parent_env, eps)
    return env, flags


def abduct_noise(cdah: CDAH, evidence: dict[str, float]) -> dict[str, float]:
    """Recover every noise term from one fully observed world.

    For an equation target the noise is observed minus the structural part;
    for an equation-less variable the noise IS its observed value (identity
    mechanism). Missing observations are an error, not a default.
    """
    _require(cdah, *evidence)
    noise: dict[str, float] = {}
    for var in cdah.topological_order():
        eq = cdah.hypernode(var).equation
        if var not in evidence:
            raise MissingEvidenceError(f"abduction needs an observed value for {var!r}")
        observed = float(evidence[var])
        if eq is None:
            noise[var] = observed
            continue
        parent_env = {}
        for p in eq.parents:
            if p not in evidence:
                raise MissingEvidenceError(
                    f"abduction for {var!r} needs an observed value for parent {p!r}")
            parent_env[p] = float(evidence[p])
        noise[var] = observed - eq.structural_value(parent_env)
    return noise


def counterfactual(cdah: CDAH, evidence: dict[str, float],
                   interventions: dict[str, float]) -> tuple[dict[str, float], list[str]]:
    """Three-step counterfactual: abduct, intervene, evaluate."""
    noise = abduct_noise(cdah, evidence)
    return do_values(cdah, interventions, noise)


# --- fitting -------------------------------------------------------------------

def fit_linear(cdah: CDAH, target: str, parents: tuple[str, ...] | None = None,
               snapshot=None) -> CDAH:
    """Fit target = intercept + sum(coef * parent) + eps by least squares.

    Uses the units where the target and all parents carry non-absent values.
    The residual scale sqrt(SSR / n) is stored with the equation.
    """
    _require(cdah, target)
    if parents is None:
        parents = tuple(sorted(cdah.parents(target)))
    else:
        parents = tuple(parents)
        _require(cdah, *parents)

    maps = {v: cdah.unit_labels(v, snapshot) for v in (target, *parents)}
    units = sorted(set().union(*maps.values()))
    rows = []
    for unit in units:
        if any(unit not in maps[v] for v in (target, *parents)):
            continue
        y = numeric_label(target, maps[target][unit])
        xs = [numeric_label(p, maps[p][unit]) for p in parents]
        rows.append((xs, y))

    if len(rows) < len(parents) + 1:
        raise InsufficientDataError(
            f"fitting {target!r} over {len(parents)} parents needs at least "
            f"{len(parents) + 1} grounded units, found {len(rows)}")

    design = np.array([[1.0, *xs] for xs, _ in rows])
    y_vec = np.array([y for _, y in rows])
    coef, _, rank, _ = np.linalg.lstsq(design, y_vec, rcond=None)
    if rank < design.shape[1]:
        raise RankDeficiencyError(
            f"design matrix for {target!r} is rank deficient; parents are collinear")
    residuals = y_vec - design @ coef
    sigma = float(np.sqrt(np.mean(residuals ** 2)))

    text = render_equation(target, float(coef[0]),
                           {p: float(c) for p, c in zip(parents, coef[1:])})
    equation = parse_equation(text)
    equation = StructuralEquation(
        target=equation.target, expr=equation.expr, text=equation.text,
        parents=equation.parents, residual_sigma=sigma)
    return cdah.set_equation(target, equation)


def fit_all_linear(cdah: CDAH, snapshot=None) -> CDAH:
    """Fit a linear equation for every variable that has parents."""
    for var in cdah.topological_order():
        if cdah.parents(var):
            cdah = fit_linear(cdah, var, snapshot=snapshot)
    return cdah


# --- backdoor adjustment ---------------------------------------------------------

def backdoor_valid(cdah: CDAH, x: str, y: str, adjustment: tuple[str, ...]) -> bool:
    """Backdoor criterion: no descendant of x in the set, and the set blocks
    every path into x's back door (checked with x's outgoing edges removed)."""
    _require(cdah, x, y, *adjustment)
    zset = set(adjustment)
    if x in zset or y in zset:
        return False
    if zset & (descendants_of(set(cdah.edges), {x}) - {x}):
        return False
    trimmed = {(s, d) for s, d in cdah.edges if s != x}
    return d_separated_sets(set(cdah.variables), trimmed, x, y, zset)


def backdoor_adjust(cdah: CDAH, x: str, y: str, adjustment: tuple[str, ...] = (),
                    snapshot=None) -> tuple[CDAH, Distribution, list[str]]:
    """Estimate P(y | do(x)) by stratified adjustment over the given set.

    Strata with no units for a given x category are skipped and the remaining
    mass renormalized (flagged). With an empty adjustment set the result is
    the plain conditional table, cell for cell.
    """
    adjustment = tuple(adjustment)
    if not backdoor_valid(cdah, x, y, adjustment):
        raise InvalidAdjustmentSetError(
            f"{sorted(adjustment)} does not satisfy the backdoor criterion for "
            f"{x!r} -> {y!r}")
    warnings: list[str] = []

    x_labels = cdah.unit_labels(x, snapshot)
    y_labels = cdah.unit_labels(y, snapshot)
    z_maps = [(z, cdah.unit_labels(z, snapshot)) for z in adjustment]
    universe = set(x_labels) | set(y_labels)
    for _, m in z_maps:
        universe |= set(m)
    units = sorted(universe)
    n = len(units)
    if n == 0:
        raise InsufficientDataError(f"no grounded units for {x!r} and {y!r}")

    def stratum(unit):
        return tuple(m.get(unit, ABSENT) for _, m in z_maps)

    x_of = {u: x_labels.get(u, ABSENT) for u in units}
    y_of = {u: y_labels.get(u, ABSENT) for u in units}
    strata: dict[tuple, list] = {}
    for u in units:
        strata.setdefault(stratum(u), []).append(u)

    given_domain = sorted({x_of[u] for u in units}, key=label_sort_key)
    out_domain = sorted({y_of[u] for u in units}, key=label_sort_key)

    cells = []
    row_counts = []
    for xv in given_domain:
        x_units = [u for u in units if x_of[u] == xv]
        row_counts.append(len(x_units))
        acc = {yv: 0.0 for yv in out_domain}
        mass = 0.0
        for z_key in sorted(strata):
            members = strata[z_key]
            pz = len(members) / n
            matching = [u for u in members if x_of[u] == xv]
            if not matching:
                warnings.append(
                    f"stratum {z_key} has no units with {x}={xv}; renormalizing")
                continue
            mass += pz
            counts: dict[str, int] = {}
            for u in matching:
                counts[y_of[u]] = counts.get(y_of[u], 0) + 1
            for yv, c in counts.items():
                acc[yv] += pz * (c / len(matching))
        if mass == 0.0:
            cells.append(tuple(0.0 for _ in out_domain))
            warnings.append(f"no stratum supports {x}={xv}")
            continue
        cells.append(tuple(acc[yv] / mass for yv in out_domain))

    dist = Distribution("ipd", tuple(given_domain), tuple(out_domain),
                        tuple(cells), tuple(row_counts))
    if (x, y) in cdah.edges:
        edge = cdah.edge(x, y)
        cdah = cdah.set_edge(CausalEdge(src=x, dst=y, support=edge.support,
                                        cpd=edge.cpd, ipd=dist))
    return cdah, dist, warnings
