"""Graph-level causal analysis: separation, roles, and drift statistics.

The d-separation test is a reachability sweep over (node, direction) states,
not a path enumeration, so it stays linear in the graph size. Path-level
evidence (which trail is active, which paths witness a confounder) is
enumerated separately and capped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .cdah import ABSENT, CDAH, Distribution, label_sort_key
from .errors import PathExplosionError, UnknownVariableError
from .estimation import estimate_cpd

PATH_CAP = 10_000


# --- structure helpers -------------------------------------------------------

def _adjacency(edges) -> tuple[dict, dict]:
    parents: dict[str, set[str]] = {}
    children: dict[str, set[str]] = {}
    for src, dst in edges:
        children.setdefault(src, set()).add(dst)
        parents.setdefault(dst, set()).add(src)
    return parents, children


def ancestors_of(edges, seeds) -> set[str]:
    """Every node with a directed path into ``seeds``, plus the seeds."""
    parents, _ = _adjacency(edges)
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        for p in parents.get(stack.pop(), ()):
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def descendants_of(edges, seeds) -> set[str]:
    """Every node reachable from ``seeds`` by directed edges, plus the seeds."""
    _, children = _adjacency(edges)
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        for c in children.get(stack.pop(), ()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def directed_paths(edges, src, dst, cap: int = PATH_CAP) -> list[tuple[str, ...]]:
    """All simple directed paths src -> ... -> dst, lexicographic order."""
    _, children = _adjacency(edges)
    out: list[tuple[str, ...]] = []
    budget = cap

    def walk(node, trail):
        nonlocal budget
        if node == dst and len(trail) > 1:
            out.append(tuple(trail))
            return
        for nxt in sorted(children.get(node, ())):
            if nxt in trail and nxt != dst:
                continue
            if nxt == dst:
                out.append(tuple(trail) + (dst,))
                continue
            budget -= 1
            if budget < 0:
                raise PathExplosionError(
                    f"more than {cap} directed paths between {src!r} and {dst!r}")
            walk(nxt, trail + [nxt])

    if src == dst:
        return []
    walk(src, [src])
    return out


# --- d-separation ------------------------------------------------------------

def d_separated_sets(nodes, edges, x: str, y: str, given=()) -> bool:
    """Directional reachability sweep; True when every trail is blocked."""
    given = set(given)
    if x == y:
        raise ValueError("d-separation needs two distinct variables")
    if x in given or y in given:
        raise ValueError("the conditioning set cannot contain an endpoint")
    parents, children = _adjacency(edges)
    opened = ancestors_of(edges, given)  # colliders with observed descendants

    # states: (node, "up") entered against an edge, (node, "down") along one
    stack = [(x, "up")]
    visited = set()
    while stack:
        state = stack.pop()
        if state in visited:
            continue
        visited.add(state)
        node, direction = state
        if node == y and node not in given:
            return False
        if direction == "up":
            if node not in given:
                for p in parents.get(node, ()):
                    stack.append((p, "up"))
                for c in children.get(node, ()):
                    stack.append((c, "down"))
        else:
            if node not in given:
                for c in children.get(node, ()):
                    stack.append((c, "down"))
            if node in opened:
                for p in parents.get(node, ()):
                    stack.append((p, "up"))
    return True


@dataclass(frozen=True)
class SeparationResult:
    separated: bool
    witness: tuple[str, ...] | None  # an active trail when not separated


def _trail_active(edges, trail, given, opened) -> bool:
    given = set(given)
    for i in range(1, len(trail) - 1):
        prev, node, nxt = trail[i - 1], trail[i], trail[i + 1]
        # a collider on the trail has both neighbors pointing at it
        collider = (prev, node) in edges and (nxt, node) in edges
        if collider:
            if node not in opened:
                return False
        else:
            if node in given:
                return False
    return True


def _undirected_trails(edges, x, y, cap=PATH_CAP):
    neigh: dict[str, set[str]] = {}
    for s, d in edges:
        neigh.setdefault(s, set()).add(d)
        neigh.setdefault(d, set()).add(s)
    out = []
    budget = cap

    def walk(node, trail):
        nonlocal budget
        for nxt in sorted(neigh.get(node, ())):
            if nxt == y:
                out.append(tuple(trail) + (y,))
                continue
            if nxt in trail:
                continue
            budget -= 1
            if budget < 0:
                raise PathExplosionError(f"more than {cap} trails between {x!r} and {y!r}")
            walk(nxt, trail + [nxt])

    walk(x, [x])
    return out


def d_separated(cdah: CDAH, x: str, y: str, given=(), *, explain: bool = False):
    """Test x independent of y given the conditioning set, in the causal graph.

    With ``explain`` the result carries one active trail as a witness when the
    pair is connected.
    """
    for name in (x, y, *given):
        if name not in cdah.variables:
            raise UnknownVariableError(f"unknown causal variable {name!r}")
    nodes = set(cdah.variables)
    edges = set(cdah.edges)
    separated = d_separated_sets(nodes, edges, x, y, given)
    if not explain:
        return separated
    witness = None
    if not separated:
        opened = ancestors_of(edges, set(given))
        for trail in _undirected_trails(edges, x, y):
            if _trail_active(edges, trail, given, opened):
                witness = trail
                break
    return SeparationResult(separated, witness)


# --- structural roles --------------------------------------------------------

@dataclass(frozen=True)
class MediatorReport:
    variable: str
    confound_free: bool


def _pair_unconfounded(cdah: CDAH, a: str, b: str) -> bool:
    return not find_confounders(cdah, a, b)


def find_mediators(cdah: CDAH, x: str, y: str) -> list[MediatorReport]:
    """Variables on directed x -> y paths, with a per-variable check that the
    mediated estimate is not confounded on any leg."""
    for name in (x, y):
        if name not in cdah.variables:
            raise UnknownVariableError(f"unknown causal variable {name!r}")
    edges = set(cdah.edges)
    internal: set[str] = set()
    for trail in directed_paths(edges, x, y):
        internal.update(trail[1:-1])
    out = []
    for m in sorted(internal):
        clean = (_pair_unconfounded(cdah, x, y)
                 and _pair_unconfounded(cdah, x, m)
                 and _pair_unconfounded(cdah, m, y))
        out.append(MediatorReport(m, clean))
    return out


def find_confounders(cdah: CDAH, x: str, y: str) -> list[str]:
    """Variables with directed paths into both x and y that share no other node."""
    for name in (x, y):
        if name not in cdah.variables:
            raise UnknownVariableError(f"unknown causal variable {name!r}")
    edges = set(cdah.edges)
    out = []
    for c in sorted(cdah.variables):
        if c in (x, y):
            continue
        to_x = directed_paths(edges, c, x)
        if not to_x:
            continue
        to_y = directed_paths(edges, c, y)
        if not to_y:
            continue
        if any(set(p) & set(q) == {c} for p in to_x for q in to_y):
            out.append(c)
    return out


def find_colliders(cdah: CDAH, x: str, y: str) -> list[str]:
    """Common effects: variables both x and y reach by otherwise disjoint paths."""
    for name in (x, y):
        if name not in cdah.variables:
            raise UnknownVariableError(f"unknown causal variable {name!r}")
    edges = set(cdah.edges)
    out = []
    for c in sorted(cdah.variables):
        if c in (x, y):
            continue
        from_x = directed_paths(edges, x, c)
        if not from_x:
            continue
        from_y = directed_paths(edges, y, c)
        if not from_y:
            continue
        if any(set(p) & set(q) == {c} for p in from_x for q in from_y):
            out.append(c)
    return out


# --- drift statistics --------------------------------------------------------

def tv_distance(a: Distribution, b: Distribution) -> float:
    """Worst-row total variation between two conditional tables.

    Rows are compared per given-category; a category supported on one side
    only counts as a full drift of 1.0. Unknown categories on both sides do
    not occur (domains are observed).
    """
    out_all = sorted(set(a.out_domain) | set(b.out_domain), key=label_sort_key)
    worst = 0.0
    for g in sorted(set(a.given_domain) | set(b.given_domain), key=label_sort_key):
        in_a = a.supported(g)
        in_b = b.supported(g)
        if in_a and in_b:
            row_a = a.row(g)
            row_b = b.row(g)
            tv = 0.5 * sum(abs(row_a.get(o, 0.0) - row_b.get(o, 0.0)) for o in out_all)
        elif in_a or in_b:
            tv = 1.0
        else:
            continue
        worst = max(worst, tv)
    return worst


def _contingency(cdah: CDAH, x: str, y: str, snapshot=None):
    x_labels = cdah.unit_labels(x, snapshot)
    y_labels = cdah.unit_labels(y, snapshot)
    universe = sorted(set(x_labels) | set(y_labels))
    counts: dict[tuple[str, str], int] = {}
    for unit in universe:
        key = (x_labels.get(unit, ABSENT), y_labels.get(unit, ABSENT))
        counts[key] = counts.get(key, 0) + 1
    rows = sorted({a for a, _ in counts}, key=label_sort_key)
    cols = sorted({b for _, b in counts}, key=label_sort_key)
    table = [[counts.get((r, c), 0) for c in cols] for r in rows]
    return rows, cols, table


def cramers_v(cdah: CDAH, x: str, y: str, snapshot=None) -> float:
    """Chi-square association strength in [0, 1] over the pair's units."""
    rows, cols, table = _contingency(cdah, x, y, snapshot)
    n = sum(sum(r) for r in table)
    k = min(len(rows), len(cols))
    if n == 0 or k < 2:
        return 0.0
    row_tot = [sum(r) for r in table]
    col_tot = [sum(table[i][j] for i in range(len(rows))) for j in range(len(cols))]
    chi2 = 0.0
    for i in range(len(rows)):
        for j in range(len(cols)):
            expected = row_tot[i] * col_tot[j] / n
            if expected > 0:
                chi2 += (table[i][j] - expected) ** 2 / expected
    return math.sqrt(chi2 / (n * (k - 1)))


@dataclass(frozen=True)
class EdgeVerdict:
    src: str
    dst: str
    verdict: str            # "valid" | "drifted" | "unsupported"
    tv: float
    dependence: float
    support: int
    fresh: Distribution


def validate_edge(cdah: CDAH, src: str, dst: str, snapshot=None, *,
                  tau: float = 0.05, rho: float = 0.1) -> EdgeVerdict:
    """Compare the stored CPD of one causal edge against a fresh estimate.

    valid       drift within tau and dependence at least rho
    drifted     the table moved, or the association fell below rho
    unsupported no unit currently carries both variables
    """
    edge = cdah.edge(src, dst)
    fresh, support = estimate_cpd(cdah, src, dst, snapshot)
    if support == 0:
        return EdgeVerdict(src, dst, "unsupported", 1.0, 0.0, 0, fresh)
    dep = cramers_v(cdah, src, dst, snapshot)
    tv = tv_distance(edge.cpd, fresh) if edge.cpd is not None else 1.0
    verdict = "valid" if (tv <= tau and dep >= rho) else "drifted"
    return EdgeVerdict(src, dst, verdict, tv, dep, support, fresh)


@dataclass(frozen=True)
class AssociationCandidate:
    a: str
    b: str
    dependence: float


def _coarsen(labels: dict[str, str], bins: int) -> dict[str, str]:
    """Collapse a wide numeric category set into equal-width groups."""
    numeric: dict[str, float] = {}
    for unit, label in labels.items():
        try:
            numeric[unit] = float(label)
        except ValueError:
            return labels
    distinct = sorted(set(numeric.values()))
    if len(distinct) <= bins:
        return labels
    lo, hi = distinct[0], distinct[-1]
    width = (hi - lo) / bins
    out = {}
    for unit, value in numeric.items():
        idx = min(int((value - lo) / width), bins - 1)
        out[unit] = f"bin{idx}"
    return out


def scan_associations(cdah: CDAH, snapshot=None, variables=None, *,
                      rho: float = 0.1, bins: int = 5) -> list[AssociationCandidate]:
    """Rank variable pairs by association strength, strongest first.

    Wide numeric domains are coarsened to ``bins`` groups so the chi-square
    statistic is not starved by near-empty cells.
    """
    names = sorted(variables) if variables is not None else sorted(cdah.variables)
    for name in names:
        if name not in cdah.variables:
            raise UnknownVariableError(f"unknown causal variable {name!r}")
    label_maps = {v: _coarsen(cdah.unit_labels(v, snapshot), bins) for v in names}
    out = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            a_labels, b_labels = label_maps[a], label_maps[b]
            universe = sorted(set(a_labels) | set(b_labels))
            counts: dict[tuple[str, str], int] = {}
            for unit in universe:
                key = (a_labels.get(unit, ABSENT), b_labels.get(unit, ABSENT))
                counts[key] = counts.get(key, 0) + 1
            rows = sorted({p for p, _ in counts})
            cols = sorted({q for _, q in counts})
            n = len(universe)
            k = min(len(rows), len(cols))
            if n == 0 or k < 2:
                continue
            row_tot = {p: sum(c for (pp, _), c in counts.items() if pp == p) for p in rows}
            col_tot = {q: sum(c for (_, qq), c in counts.items() if qq == q) for q in cols}
            chi2 = 0.0
            for p in rows:
                for q in cols:
                    expected = row_tot[p] * col_tot[q] / n
                    if expected > 0:
                        chi2 += (counts.get((p, q), 0) - expected) ** 2 / expected
            dep = math.sqrt(chi2 / (n * (k - 1)))
            if dep >= rho:
                out.append(AssociationCandidate(a, b, dep))
    out.sort(key=lambda c: (-c.dependence, c.a, c.b))
    return out
