"""Causal model layered over a property graph snapshot.

The model is a directed acyclic graph of hypernodes. Each hypernode is one
causal variable; its members ground the variable in the data, one member per
anchor node (the unit of analysis) together with the subgraph that realized
it. Virtual BELONGS edges from anchor to hypernode are implied by membership
and are materialized only during query matching, never stored.

A variable's value for a unit is categorical. Without a value rule the
variable is presence-shaped: "present" for members, "absent" for everyone
else. With a value rule the value is read from a property inside the member
subgraph and optionally binned. Boolean property values normalize into the
same presence vocabulary (True -> "present", False -> "absent"), which keeps
recorded-but-negative observations out of support counts.

Instances are value objects: every mutating operation returns a new model and
leaves the receiver untouched, so callers can treat versions as snapshots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .equations import StructuralEquation, parse_equation
from .errors import (
    CdahFormatError,
    CycleError,
    DuplicateVariableError,
    UnknownVariableError,
    ValueRuleConflictError,
)
from .graph import GraphSnapshot

PRESENT = "present"
ABSENT = "absent"


def value_label(value) -> str:
    """Canonical category label for a scalar property value."""
    if isinstance(value, bool):
        return PRESENT if value else ABSENT
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def label_sort_key(label: str):
    """Deterministic category order: numerically when possible, else by text."""
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


@dataclass(frozen=True)
class Binning:
    kind: str  # "categorical" | "equal_width"
    bins: int | None = None

    def __post_init__(self):
        if self.kind not in ("categorical", "equal_width"):
            raise CdahFormatError(f"unknown binning kind {self.kind!r}")
        if self.kind == "equal_width" and (self.bins is None or self.bins < 2):
            raise CdahFormatError("equal_width binning needs at least 2 bins")


CATEGORICAL = Binning("categorical")


@dataclass(frozen=True)
class ValueRule:
    """How a variable's value is read off a member subgraph.

    ``binding`` records which pattern variable supplied the value at
    extraction time; reading scans the member subgraph for ``prop`` so the
    rule keeps working after a round-trip through a file, where only node id
    sets survive.
    """

    prop: str
    binding: str | None = None
    binning: Binning = CATEGORICAL


@dataclass(frozen=True)
class Member:
    anchor: str
    nodes: frozenset[str]
    edges: frozenset[str]


@dataclass(frozen=True)
class HyperNode:
    variable: str
    members: tuple[Member, ...] = ()
    value_rule: ValueRule | None = None
    equation: StructuralEquation | None = None

    @property
    def id(self) -> str:
        # variable names are unique, so they double as identifiers
        return self.variable

    def anchors(self) -> list[str]:
        return [m.anchor for m in self.members]


@dataclass(frozen=True)
class Distribution:
    """Row-stochastic table P(out | given) with per-row unit counts.

    A row whose count is zero is unsupported: it carries zeros and is skipped
    by probability queries rather than treated as data.
    """

    kind: str  # "cpd" (conditional) | "ipd" (interventional)
    given_domain: tuple[str, ...]
    out_domain: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]
    row_counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.rows) != len(self.given_domain) or len(self.row_counts) != len(self.given_domain):
            raise CdahFormatError("distribution shape does not match its domains")
        for row in self.rows:
            if len(row) != len(self.out_domain):
                raise CdahFormatError("distribution row width does not match the out domain")

    def supported(self, given: str) -> bool:
        if given not in self.given_domain:
            return False
        return self.row_counts[self.given_domain.index(given)] > 0

    def prob(self, out: str, given: str) -> float:
        return self.rows[self.given_domain.index(given)][self.out_domain.index(out)]

    def row(self, given: str) -> dict[str, float]:
        i = self.given_domain.index(given)
        return dict(zip(self.out_domain, self.rows[i]))

    def allclose(self, other: "Distribution", tol: float = 1e-9) -> bool:
        if (self.given_domain, self.out_domain) != (other.given_domain, other.out_domain):
            return False
        if self.row_counts != other.row_counts:
            return False
        for a, b in zip(self.rows, other.rows):
            for x, y in zip(a, b):
                if abs(x - y) > tol:
                    return False
        return True


@dataclass(frozen=True)
class CausalEdge:
    src: str
    dst: str
    support: int = 0
    cpd: Distribution | None = None  # conditional P(dst | src)
    ipd: Distribution | None = None  # interventional P(dst | do(src))


@dataclass(frozen=True)
class CDAH:
    """Immutable causal model version. See the module docstring."""

    variables: dict = field(default_factory=dict)  # name -> HyperNode
    edges: dict = field(default_factory=dict)      # (src, dst) -> CausalEdge
    origins: tuple = ()                            # ((variable, query text), ...)
    over: GraphSnapshot | None = field(default=None, compare=False)
    source: str | None = None

    # -- structure ----------------------------------------------------------

    def hypernode(self, variable: str) -> HyperNode:
        try:
            return self.variables[variable]
        except KeyError:
            raise UnknownVariableError(f"unknown causal variable {variable!r}") from None

    def parents(self, variable: str) -> list[str]:
        return sorted(src for (src, dst) in self.edges if dst == variable)

    def children(self, variable: str) -> list[str]:
        return sorted(dst for (src, dst) in self.edges if src == variable)

    def edge(self, src: str, dst: str) -> CausalEdge:
        try:
            return self.edges[(src, dst)]
        except KeyError:
            raise UnknownVariableError(f"no causal edge {src!r} -> {dst!r}") from None

    def upsert_hypernode(self, variable: str, member: Member | None = None,
                         value_rule: ValueRule | None = None) -> "CDAH":
        """Create the hypernode if needed and merge one member (dedup by anchor).

        Re-adding an anchor keeps the member already present. Passing a value
        rule that conflicts with an existing one is an error; passing the same
        rule again is a no-op.
        """
        node = self.variables.get(variable)
        if node is None:
            node = HyperNode(variable=variable, value_rule=value_rule)
        elif value_rule is not None:
            if node.value_rule is not None and node.value_rule != value_rule:
                raise ValueRuleConflictError(
                    f"variable {variable!r} already has a different value rule")
            if node.value_rule is None:
                node = replace(node, value_rule=value_rule)
        if member is not None and member.anchor not in {m.anchor for m in node.members}:
            node = replace(node, members=node.members + (member,))
        variables = dict(self.variables)
        variables[variable] = node
        return replace(self, variables=variables)

    def set_value_rule(self, variable: str, rule: ValueRule | None) -> "CDAH":
        node = self.hypernode(variable)
        variables = dict(self.variables)
        variables[variable] = replace(node, value_rule=rule)
        return replace(self, variables=variables)

    def set_equation(self, variable: str, equation: StructuralEquation | None) -> "CDAH":
        node = self.hypernode(variable)
        variables = dict(self.variables)
        variables[variable] = replace(node, equation=equation)
        return replace(self, variables=variables)

    def set_members(self, variable: str, members: tuple[Member, ...]) -> "CDAH":
        node = self.hypernode(variable)
        variables = dict(self.variables)
        variables[variable] = replace(node, members=tuple(members))
        return replace(self, variables=variables)

    def drop_hypernode(self, variable: str) -> "CDAH":
        self.hypernode(variable)
        variables = {k: v for k, v in self.variables.items() if k != variable}
        edges = {k: v for k, v in self.edges.items() if variable not in k}
        origins = tuple((v, q) for v, q in self.origins if v != variable)
        return replace(self, variables=variables, edges=edges, origins=origins)

    def add_causal_edge(self, src: str, dst: str) -> "CDAH":
        """Add src -> dst. Idempotent; rejects self-loops and cycles."""
        self.hypernode(src)
        self.hypernode(dst)
        if src == dst:
            raise CycleError(f"self-edge on {src!r} is not allowed", witness=[src, src])
        if (src, dst) in self.edges:
            return self
        edges = dict(self.edges)
        edges[(src, dst)] = CausalEdge(src, dst)
        out = replace(self, edges=edges)
        cycle = out.find_cycle()
        if cycle is not None:
            raise CycleError(
                f"edge {src!r} -> {dst!r} would close a cycle: {' -> '.join(cycle)}",
                witness=cycle)
        return out

    def set_edge(self, edge: CausalEdge) -> "CDAH":
        if (edge.src, edge.dst) not in self.edges:
            self.hypernode(edge.src)
            self.hypernode(edge.dst)
        edges = dict(self.edges)
        edges[(edge.src, edge.dst)] = edge
        return replace(self, edges=edges)

    def drop_edge(self, src: str, dst: str) -> "CDAH":
        self.edge(src, dst)
        edges = {k: v for k, v in self.edges.items() if k != (src, dst)}
        return replace(self, edges=edges)

    def with_origin(self, variable: str, query_text: str) -> "CDAH":
        """Record that a query grounded this variable.

        A variable keeps every distinct origin query, in first-recorded
        order; replaying them all is what rebuilds the structure, so none
        may be forgotten.
        """
        if (variable, query_text) in self.origins:
            return self
        return replace(self, origins=self.origins + ((variable, query_text),))

    def find_cycle(self) -> list[str] | None:
        """Return one directed cycle as [v0, ..., v0], or None when acyclic."""
        color: dict[str, int] = {}
        stack: list[str] = []

        def visit(v: str):
            color[v] = 1
            stack.append(v)
            for c in self.children(v):
                if color.get(c, 0) == 1:
                    return stack[stack.index(c):] + [c]
                if color.get(c, 0) == 0:
                    found = visit(c)
                    if found:
                        return found
            stack.pop()
            color[v] = 2
            return None

        for v in sorted(self.variables):
            if color.get(v, 0) == 0:
                found = visit(v)
                if found:
                    return found
        return None

    def check_acyclic(self) -> None:
        cycle = self.find_cycle()
        if cycle is not None:
            raise CycleError(f"causal graph has a cycle: {' -> '.join(cycle)}", witness=cycle)

    def topological_order(self) -> list[str]:
        self.check_acyclic()
        seen: set[str] = set()
        order: list[str] = []

        def visit(v: str):
            if v in seen:
                return
            seen.add(v)
            for p in self.parents(v):
                visit(p)
            order.append(v)

        for v in sorted(self.variables):
            visit(v)
        return order

    # -- values -------------------------------------------------------------

    def unit_labels(self, variable: str, snapshot: GraphSnapshot | None = None) -> dict[str, str]:
        """Category label per member anchor, for the given (or extraction) snapshot."""
        snap = snapshot if snapshot is not None else self.over
        node = self.hypernode(variable)
        rule = node.value_rule
        if rule is None:
            return {m.anchor: PRESENT for m in node.members}
        if snap is None:
            raise CdahFormatError("value rules need a snapshot to read properties from")

        raw: dict[str, object] = {}
        for m in node.members:
            value = None
            for node_id in sorted(m.nodes):
                if snap.has_node(node_id):
                    props = snap.node(node_id).props
                    if rule.prop in props and props[rule.prop] is not None:
                        value = props[rule.prop]
                        break
            if value is not None:
                raw[m.anchor] = value

        if rule.binning.kind == "categorical":
            return {a: value_label(v) for a, v in raw.items()}

        numeric = {a: float(v) for a, v in raw.items()
                   if isinstance(v, (int, float)) and not isinstance(v, bool)}
        if not numeric:
            return {}
        lo, hi = min(numeric.values()), max(numeric.values())
        k = rule.binning.bins
        if lo == hi:
            mid = repr(lo)
            return {a: mid for a in numeric}
        width = (hi - lo) / k
        out = {}
        for a, v in numeric.items():
            i = min(int((v - lo) / width), k - 1)
            out[a] = repr(lo + (i + 0.5) * width)
        return out

    def variable_value(self, variable: str, anchor: str,
                       snapshot: GraphSnapshot | None = None) -> str:
        """Label for one unit; "absent" for non-members and unreadable values."""
        labels = self.unit_labels(variable, snapshot)
        return labels.get(anchor, ABSENT)

    def stale_members(self, snapshot: GraphSnapshot) -> list[tuple[str, str]]:
        """Members whose grounding no longer resolves, as (variable, anchor) pairs."""
        out = []
        for name in sorted(self.variables):
            for m in self.variables[name].members:
                if not snapshot.has_node(m.anchor) or \
                        any(not snapshot.has_node(i) for i in m.nodes) or \
                        any(i not in snapshot.edges for i in m.edges):
                    out.append((name, m.anchor))
        return out

    # -- comparison ---------------------------------------------------------

    def same_structure(self, other: "CDAH", tol: float = 0.0) -> bool:
        """Equal hypernodes, members, edges, supports, and distributions.

        Equations and provenance are excluded; distributions compare within
        ``tol`` per cell.
        """
        if set(self.variables) != set(other.variables):
            return False
        for name, node in self.variables.items():
            o = other.variables[name]
            mine = {(m.anchor, m.nodes, m.edges) for m in node.members}
            theirs = {(m.anchor, m.nodes, m.edges) for m in o.members}
            if mine != theirs or node.value_rule != o.value_rule:
                return False
        if set(self.edges) != set(other.edges):
            return False
        for key, e in self.edges.items():
            o = other.edges[key]
            if e.support != o.support:
                return False
            for a, b in ((e.cpd, o.cpd), (e.ipd, o.ipd)):
                if (a is None) != (b is None):
                    return False
                if a is not None and not a.allclose(b, tol):
                    return False
        return True


# --- persistence ------------------------------------------------------------

FORMAT = "cdah/1"


def _distribution_to_json(d: Distribution | None):
    if d is None:
        return None
    return {
        "kind": d.kind,
        "given_domain": list(d.given_domain),
        "out_domain": list(d.out_domain),
        "rows": [list(r) for r in d.rows],
        "row_counts": list(d.row_counts),
    }


def _distribution_from_json(obj) -> Distribution | None:
    if obj is None:
        return None
    try:
        return Distribution(
            kind=obj["kind"],
            given_domain=tuple(obj["given_domain"]),
            out_domain=tuple(obj["out_domain"]),
            rows=tuple(tuple(float(x) for x in r) for r in obj["rows"]),
            row_counts=tuple(int(c) for c in obj["row_counts"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CdahFormatError(f"bad distribution record: {exc}") from None


def to_json_dict(c: CDAH) -> dict:
    variables = []
    for name in sorted(c.variables):
        node = c.variables[name]
        rule = None
        if node.value_rule is not None:
            rule = {
                "prop": node.value_rule.prop,
                "binding": node.value_rule.binding,
                "binning": {"kind": node.value_rule.binning.kind,
                            "bins": node.value_rule.binning.bins},
            }
        members = [
            {"anchor": m.anchor, "nodes": sorted(m.nodes), "edges": sorted(m.edges)}
            for m in sorted(node.members, key=lambda m: m.anchor)
        ]
        eq = None
        if node.equation is not None:
            eq = {"text": node.equation.text, "residual_sigma": node.equation.residual_sigma}
        variables.append({"name": name, "value_rule": rule, "equation": eq, "members": members})

    edges = []
    for (src, dst) in sorted(c.edges):
        e = c.edges[(src, dst)]
        edges.append({
            "src": src, "dst": dst, "support": e.support,
            "cpd": _distribution_to_json(e.cpd),
            "ipd": _distribution_to_json(e.ipd),
        })

    return {
        "format": FORMAT,
        "source": c.source,
        "variables": variables,
        "edges": edges,
        "origins": [[v, q] for v, q in c.origins],
    }


def from_json_dict(obj: dict) -> CDAH:
    if not isinstance(obj, dict) or obj.get("format") != FORMAT:
        raise CdahFormatError(f"not a causal model file (format {obj.get('format')!r})")
    try:
        return _from_json_body(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise CdahFormatError(f"bad model record: {exc!r}") from None


def _from_json_body(obj: dict) -> CDAH:
    variables: dict[str, HyperNode] = {}
    for rec in obj.get("variables", []):
        name = rec.get("name")
        if not isinstance(name, str) or not name:
            raise CdahFormatError("variable record is missing its name")
        if name in variables:
            raise DuplicateVariableError(f"variable {name!r} appears twice")
        rule = None
        if rec.get("value_rule") is not None:
            r = rec["value_rule"]
            rule = ValueRule(
                prop=r["prop"],
                binding=r.get("binding"),
                binning=Binning(r["binning"]["kind"], r["binning"].get("bins")),
            )
        equation = None
        if rec.get("equation") is not None:
            equation = parse_equation(rec["equation"]["text"])
            equation = replace(equation, residual_sigma=rec["equation"].get("residual_sigma"))
            if equation.target != name:
                raise CdahFormatError(
                    f"equation target {equation.target!r} does not match variable {name!r}")
        seen_anchors = set()
        members = []
        for m in rec.get("members", []):
            if m["anchor"] in seen_anchors:
                raise CdahFormatError(f"duplicate member anchor {m['anchor']!r} on {name!r}")
            seen_anchors.add(m["anchor"])
            members.append(Member(m["anchor"], frozenset(m.get("nodes", [])),
                                  frozenset(m.get("edges", []))))
        variables[name] = HyperNode(variable=name, members=tuple(members),
                                    value_rule=rule, equation=equation)

    edges: dict[tuple[str, str], CausalEdge] = {}
    for rec in obj.get("edges", []):
        src, dst = rec["src"], rec["dst"]
        for v in (src, dst):
            if v not in variables:
                raise CdahFormatError(f"edge endpoint {v!r} is not a declared variable")
        if src == dst:
            raise CycleError(f"self-edge on {src!r}", witness=[src, src])
        if (src, dst) in edges:
            raise CdahFormatError(f"edge {src!r} -> {dst!r} appears twice")
        edges[(src, dst)] = CausalEdge(
            src, dst, support=int(rec.get("support", 0)),
            cpd=_distribution_from_json(rec.get("cpd")),
            ipd=_distribution_from_json(rec.get("ipd")),
        )

    origins = tuple((v, q) for v, q in obj.get("origins", []))
    c = CDAH(variables=variables, edges=edges, origins=origins, source=obj.get("source"))
    c.check_acyclic()
    return c


def save_cdah(c: CDAH, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(c), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_cdah(path: str) -> CDAH:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CdahFormatError(f"invalid JSON in {path}: {exc.msg}") from None
    return from_json_dict(obj)
