"""Query evaluation over a snapshot plus an optional causal model.

Matching uses homomorphism semantics for nodes (two pattern variables may
bind the same element) and distinctness for edges within one MATCH clause.
The data layer and the causal layer share one pattern language: a label that
names a causal variable binds its hypernode, membership is walked through
virtual BELONGS edges, and untyped edges never cross layers.

Rows flow through clauses left to right. Plain MATCH deduplicates on the
named bindings, ALL keeps every distinct edge assignment, SHORTEST keeps the
k shortest instances of the first pattern per endpoint pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..cdah import CDAH, Distribution, Member
from ..errors import EvaluationError, PathExplosionError
from ..estimation import eval_probability
from ..graph import Edge, GraphSnapshot, Node
from ..scm import do_values
from .ast import (
    Binary,
    DoCalcExpr,
    EdgePattern,
    ExistsExpr,
    ExtractClause,
    FuncCall,
    Lit,
    MatchClause,
    MergeClause,
    NodePattern,
    PatternChain,
    ProbabilityExpr,
    Projection,
    PropRef,
    QueryAst,
    ReturnClause,
    Unary,
    VarRef,
    WithClause,
)
from .parser import parse, print_expr

DEFAULT_MAX_PATHS = 10_000


# --- bound values -------------------------------------------------------------

@dataclass(frozen=True)
class NodeVal:
    node: Node


@dataclass(frozen=True)
class HyperVal:
    variable: str


@dataclass(frozen=True)
class EdgeVal:
    edge: Edge


@dataclass(frozen=True)
class CausalEdgeVal:
    src: str
    dst: str


@dataclass(frozen=True)
class BelongsVal:
    anchor: str
    variable: str


@dataclass(frozen=True)
class PathVal:
    nodes: tuple
    edges: tuple

    @property
    def length(self) -> int:
        return len(self.edges)


def value_key(v):
    """Deterministic ordering / deduplication key for any bound value."""
    if isinstance(v, NodeVal):
        return ("node", v.node.id)
    if isinstance(v, HyperVal):
        return ("hyper", v.variable)
    if isinstance(v, EdgeVal):
        return ("edge", v.edge.id)
    if isinstance(v, CausalEdgeVal):
        return ("cedge", v.src, v.dst)
    if isinstance(v, BelongsVal):
        return ("belongs", v.anchor, v.variable)
    if isinstance(v, PathVal):
        return ("path", tuple(value_key(x) for x in v.nodes),
                tuple(value_key(e) for e in v.edges))
    if isinstance(v, bool):
        return ("bool", "t" if v else "f")
    if isinstance(v, (int, float)):
        return ("num", float(v))
    if isinstance(v, str):
        return ("str", v)
    if v is None:
        return ("null",)
    if isinstance(v, (list, tuple)):
        return ("list", tuple(value_key(x) for x in v))
    if isinstance(v, dict):
        return ("dict", tuple(sorted((k, value_key(x)) for k, x in v.items())))
    if isinstance(v, Distribution):
        return ("dist", v.given_domain, v.out_domain, v.rows, v.row_counts)
    return ("other", repr(v))


def render_value(v):
    """JSON-safe view of a bound value, for output and the CLI."""
    if isinstance(v, NodeVal):
        return {"kind": "node", "id": v.node.id, "labels": sorted(v.node.labels),
                "props": dict(sorted(v.node.props.items()))}
    if isinstance(v, HyperVal):
        return {"kind": "hypernode", "variable": v.variable}
    if isinstance(v, EdgeVal):
        e = v.edge
        return {"kind": "edge", "id": e.id, "type": e.type, "src": e.src,
                "dst": e.dst, "props": dict(sorted(e.props.items()))}
    if isinstance(v, CausalEdgeVal):
        return {"kind": "causal_edge", "src": v.src, "dst": v.dst}
    if isinstance(v, BelongsVal):
        return {"kind": "belongs", "anchor": v.anchor, "variable": v.variable}
    if isinstance(v, PathVal):
        return {"kind": "path", "length": v.length,
                "nodes": [render_value(x) for x in v.nodes],
                "edges": [render_value(e) for e in v.edges]}
    if isinstance(v, Distribution):
        return {"kind": "distribution", "given": list(v.given_domain),
                "out": list(v.out_domain),
                "rows": {g: dict(zip(v.out_domain, row))
                         for g, row in zip(v.given_domain, v.rows)},
                "counts": dict(zip(v.given_domain, v.row_counts))}
    if isinstance(v, (list, tuple)):
        return [render_value(x) for x in v]
    if isinstance(v, dict):
        return {k: render_value(x) for k, x in sorted(v.items())}
    return v


# --- evaluation context ---------------------------------------------------------

class _Ctx:
    def __init__(self, snapshot: GraphSnapshot, cdah: CDAH | None, max_paths: int):
        self.snapshot = snapshot
        self.cdah = cdah
        self.max_paths = max_paths
        self.budget = max_paths
        self.warnings: list[str] = []
        self._warned: set[str] = set()

    def warn_once(self, message: str):
        if message not in self._warned:
            self._warned.add(message)
            self.warnings.append(message)

    def spend(self):
        self.budget -= 1
        if self.budget < 0:
            raise PathExplosionError(
                f"path enumeration exceeded the cap of {self.max_paths}")

    def is_causal_label(self, label: str) -> bool:
        return self.cdah is not None and label in self.cdah.variables

    def hyper_names(self) -> list[str]:
        return sorted(self.cdah.variables) if self.cdah is not None else []

    def causal_pairs(self) -> list[tuple[str, str]]:
        return sorted(self.cdah.edges) if self.cdah is not None else []

    def anchors_of(self, variable: str) -> list[str]:
        return self.cdah.variables[variable].anchors()


# --- node and edge matching -----------------------------------------------------

def _scalar_eq(a, b) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _node_matches(ctx: _Ctx, val, pat: NodePattern) -> bool:
    if isinstance(val, NodeVal):
        if pat.label is not None:
            if ctx.is_causal_label(pat.label):
                return False
            if pat.label not in val.node.labels:
                return False
        for key, want in pat.props:
            if key not in val.node.props or not _scalar_eq(val.node.props[key], want):
                return False
        return True
    if isinstance(val, HyperVal):
        if pat.props:
            return False
        if pat.label is None:
            return True
        return ctx.is_causal_label(pat.label) and pat.label == val.variable
    return False


def _node_candidates(ctx: _Ctx, pat: NodePattern, binding: dict):
    if pat.var and pat.var in binding:
        val = binding[pat.var]
        return [val] if _node_matches(ctx, val, pat) else []
    if pat.label is not None:
        if ctx.is_causal_label(pat.label):
            hv = HyperVal(pat.label)
            return [hv] if _node_matches(ctx, hv, pat) else []
        found = [NodeVal(n) for n in ctx.snapshot.nodes_with_label(pat.label)]
        if not found:
            ctx.warn_once(f"label {pat.label!r} matches nothing")
        return [v for v in found if _node_matches(ctx, v, pat)]
    out = [NodeVal(ctx.snapshot.nodes[i]) for i in sorted(ctx.snapshot.nodes)]
    out.extend(HyperVal(v) for v in ctx.hyper_names())
    return [v for v in out if _node_matches(ctx, v, pat)]


def _edge_steps(ctx: _Ctx, source, pat: EdgePattern):
    """(edge value, neighbor value) pairs leaving ``source`` along the pattern.

    Untyped edges stay inside the source's layer. BELONGS is only walked when
    named explicitly, and always runs anchor -> hypernode.
    """
    out = []
    if isinstance(source, NodeVal):
        nid = source.node.id
        if pat.type == "BELONGS":
            if pat.direction == "out" and ctx.cdah is not None:
                for var in ctx.hyper_names():
                    if nid in ctx.cdah.variables[var].anchors():
                        out.append((BelongsVal(nid, var), HyperVal(var)))
            return out
        edges = ctx.snapshot.out_edges(nid) if pat.direction == "out" \
            else ctx.snapshot.in_edges(nid)
        for e in sorted(edges, key=lambda e: e.id):
            if pat.type is not None and e.type != pat.type:
                continue
            other = e.dst if pat.direction == "out" else e.src
            out.append((EdgeVal(e), NodeVal(ctx.snapshot.node(other))))
        return out
    if isinstance(source, HyperVal):
        var = source.variable
        if pat.type == "BELONGS":
            if pat.direction == "in":
                for anchor in sorted(ctx.anchors_of(var)):
                    if ctx.snapshot.has_node(anchor):
                        out.append((BelongsVal(anchor, var),
                                    NodeVal(ctx.snapshot.node(anchor))))
            return out
        if pat.type is not None:
            return out
        for src, dst in ctx.causal_pairs():
            if pat.direction == "out" and src == var:
                out.append((CausalEdgeVal(src, dst), HyperVal(dst)))
            elif pat.direction == "in" and dst == var:
                out.append((CausalEdgeVal(src, dst), HyperVal(src)))
        return out
    return out


def _star_paths(ctx: _Ctx, source, pat: EdgePattern, used: set):
    """Simple paths of one or more edges from ``source`` along the pattern.

    Returns (edge values, intermediate node values, target value) triples in
    depth-first order. Every extension spends path budget.
    """
    results = []
    start_key = value_key(source)

    def walk(current, edges_acc, mids_acc, seen_nodes):
        for ev, tv in _edge_steps(ctx, current, pat):
            ekey = value_key(ev)
            if ekey in used or any(value_key(e) == ekey for e in edges_acc):
                continue
            tkey = value_key(tv)
            if tkey == start_key or tkey in seen_nodes:
                continue
            ctx.spend()
            results.append((edges_acc + [ev], list(mids_acc), tv))
            walk(tv, edges_acc + [ev], mids_acc + [tv], seen_nodes | {tkey})

    walk(source, [], [], set())
    return results


@dataclass
class _ChainMatch:
    binding: dict
    used: set                      # edge keys consumed by this chain
    nodes: tuple = ()
    edges: tuple = ()


def _match_chain(ctx: _Ctx, chain: PatternChain, binding: dict, used: set):
    """All matches of one chain, extending ``binding`` and edge set ``used``."""
    elements = chain.elements
    out: list[_ChainMatch] = []

    def bind_var(b, var, value) -> dict | None:
        if var is None:
            return b
        if var in b:
            return b if value_key(b[var]) == value_key(value) else None
        nb = dict(b)
        nb[var] = value
        return nb

    def rec(idx, b, u, nodes_acc, edges_acc):
        if idx >= len(elements):
            if chain.name:
                if chain.name in b:
                    raise EvaluationError(f"path name {chain.name!r} is already bound")
                b = dict(b)
                b[chain.name] = PathVal(tuple(nodes_acc), tuple(edges_acc))
            out.append(_ChainMatch(b, u, tuple(nodes_acc), tuple(edges_acc)))
            return
        pat = elements[idx]
        if isinstance(pat, NodePattern):
            for cand in _node_candidates(ctx, pat, b):
                nb = bind_var(b, pat.var, cand)
                if nb is None:
                    continue
                rec(idx + 1, nb, u, nodes_acc + [cand], edges_acc)
            return
        source = nodes_acc[-1]
        next_pat = elements[idx + 1]
        if pat.star:
            for seg_edges, seg_mids, target in _star_paths(ctx, source, pat, u):
                if not _node_matches(ctx, target, next_pat):
                    continue
                nb = bind_var(b, next_pat.var, target)
                if nb is None:
                    continue
                if pat.var is not None:
                    seg = PathVal((source, *seg_mids, target), tuple(seg_edges))
                    nb = bind_var(nb, pat.var, seg)
                    if nb is None:
                        continue
                nu = u | {value_key(e) for e in seg_edges}
                rec(idx + 2, nb, nu,
                    nodes_acc + seg_mids + [target], edges_acc + seg_edges)
            return
        for ev, tv in _edge_steps(ctx, source, pat):
            ekey = value_key(ev)
            if ekey in u:
                continue
            if not _node_matches(ctx, tv, next_pat):
                continue
            nb = bind_var(b, pat.var, ev)
            if nb is None:
                continue
            nb = bind_var(nb, next_pat.var, tv)
            if nb is None:
                continue
            rec(idx + 2, nb, u | {ekey}, nodes_acc + [tv], edges_acc + [ev])

    rec(0, binding, used, [], [])
    return out


def _match_clause(ctx: _Ctx, clause: MatchClause, base: dict) -> list[dict]:
    chains = clause.patterns
    first = _match_chain(ctx, chains[0], base, set())

    if clause.mode.kind == "shortest":
        groups: dict = {}
        for m in first:
            key = (value_key(m.nodes[0]), value_key(m.nodes[-1])) if m.nodes else ((), ())
            groups.setdefault(key, []).append(m)
        kept = []
        for key in sorted(groups):
            ranked = sorted(groups[key],
                            key=lambda m: (len(m.edges), tuple(value_key(e) for e in m.edges)))
            kept.extend(ranked[:clause.mode.k])
        first = kept

    states = [(m.binding, m.used) for m in first]
    for chain in chains[1:]:
        nxt = []
        for b, u in states:
            for m in _match_chain(ctx, chain, b, u):
                nxt.append((m.binding, m.used))
        states = nxt

    rows = [b for b, _ in states]
    if clause.where is not None:
        rows = [b for b in rows if eval_expr(ctx, clause.where, b) is True]

    if clause.mode.kind == "all":
        return rows
    seen = set()
    deduped = []
    for b in rows:
        key = tuple(sorted((k, value_key(v)) for k, v in b.items()))
        if key in seen:
            continue
        seen.add(key)
        deduped.append(b)
    return deduped


# --- expressions ------------------------------------------------------------------

def _as_labels(v):
    if isinstance(v, NodeVal):
        return sorted(v.node.labels)
    if isinstance(v, HyperVal):
        return [v.variable]
    if isinstance(v, EdgeVal):
        return [v.edge.type]
    if isinstance(v, BelongsVal):
        return ["BELONGS"]
    if isinstance(v, CausalEdgeVal):
        return ["CAUSES"]
    raise EvaluationError("labels() needs a bound node or edge")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def eval_expr(ctx: _Ctx, expr, binding: dict):
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, VarRef):
        if expr.name not in binding:
            raise EvaluationError(f"variable {expr.name!r} is not bound")
        return binding[expr.name]
    if isinstance(expr, PropRef):
        if expr.var not in binding:
            raise EvaluationError(f"variable {expr.var!r} is not bound")
        holder = binding[expr.var]
        if isinstance(holder, NodeVal):
            return holder.node.props.get(expr.key)
        if isinstance(holder, EdgeVal):
            return holder.edge.props.get(expr.key)
        return None
    if isinstance(expr, Unary):
        val = eval_expr(ctx, expr.operand, binding)
        if expr.op == "NOT":
            if val is None:
                return None
            if isinstance(val, bool):
                return not val
            raise EvaluationError("NOT needs a boolean operand")
        if val is None:
            return None
        if _is_number(val):
            return -val
        raise EvaluationError("unary minus needs a number")
    if isinstance(expr, Binary):
        return _eval_binary(ctx, expr, binding)
    if isinstance(expr, FuncCall):
        if expr.name == "labels":
            return _as_labels(eval_expr(ctx, expr.arg, binding))
        raise EvaluationError(f"{expr.name}() is an aggregate; it cannot be nested")
    if isinstance(expr, ExistsExpr):
        return _eval_exists(ctx, expr, binding)
    if isinstance(expr, (ProbabilityExpr, DoCalcExpr)):
        raise EvaluationError(
            "statistics operators are only evaluated as top-level projections")
    raise EvaluationError(f"cannot evaluate {expr!r}")


def _eval_binary(ctx: _Ctx, expr: Binary, binding: dict):
    op = expr.op
    if op in ("AND", "OR"):
        left = eval_expr(ctx, expr.left, binding)
        if op == "AND":
            if left is False:
                return False
            right = eval_expr(ctx, expr.right, binding)
            if left is True and right is True:
                return True
            if left is None or right is None:
                return None if (right is not False) else False
            return bool(left) and bool(right)
        if left is True:
            return True
        right = eval_expr(ctx, expr.right, binding)
        if right is True:
            return True
        if left is None or right is None:
            return None
        return bool(left) or bool(right)

    left = eval_expr(ctx, expr.left, binding)
    right = eval_expr(ctx, expr.right, binding)
    if op in ("=", "<>"):
        eq = _values_equal(left, right)
        if eq is None:
            return None
        return eq if op == "=" else not eq
    if op in ("<", ">", "<=", ">="):
        if left is None or right is None:
            return None
        if _is_number(left) and _is_number(right):
            pass
        elif isinstance(left, str) and isinstance(right, str):
            pass
        else:
            return False
        return {"<": left < right, ">": left > right,
                "<=": left <= right, ">=": left >= right}[op]
    # arithmetic
    if left is None or right is None:
        return None
    if op == "+" and isinstance(left, str) and isinstance(right, str):
        return left + right
    if not (_is_number(left) and _is_number(right)):
        raise EvaluationError(f"operator {op} needs numbers")
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if right == 0:
        raise EvaluationError("division by zero")
    return left / right


def _values_equal(left, right):
    if left is None or right is None:
        return None
    structural = (NodeVal, HyperVal, EdgeVal, CausalEdgeVal, BelongsVal, PathVal)
    if isinstance(left, structural) or isinstance(right, structural):
        if isinstance(left, structural) and isinstance(right, structural):
            return value_key(left) == value_key(right)
        return False
    if isinstance(left, bool) != isinstance(right, bool):
        return False
    return left == right


def _eval_exists(ctx: _Ctx, expr: ExistsExpr, binding: dict) -> bool:
    states = [(dict(binding), set())]
    for chain in expr.patterns:
        nxt = []
        for b, u in states:
            for m in _match_chain(ctx, chain, b, u):
                nxt.append((m.binding, m.used))
        states = nxt
        if not states:
            return False
    if expr.where is None:
        return True
    return any(eval_expr(ctx, expr.where, b) is True for b, _ in states)


# --- projections -------------------------------------------------------------------

def _column_name(item: Projection) -> str:
    if item.alias:
        return item.alias
    return print_expr(item.expr)


def _is_aggregate(expr) -> bool:
    return isinstance(expr, FuncCall) and expr.name in ("count", "distinct")


def _eval_projection_cell(ctx: _Ctx, expr, binding: dict):
    if isinstance(expr, ProbabilityExpr):
        if ctx.cdah is None:
            raise EvaluationError("PROBABILITY needs a causal model")
        target = (expr.target.variable, expr.target.value)
        conditions = tuple((t.variable, t.value) for t in expr.conditions)
        return eval_probability(ctx.cdah, ctx.snapshot, target, conditions)
    if isinstance(expr, DoCalcExpr):
        return _eval_do_calculus(ctx, expr)
    return eval_expr(ctx, expr, binding)


def _eval_do_calculus(ctx: _Ctx, expr: DoCalcExpr):
    if ctx.cdah is None:
        raise EvaluationError("DO_CALCULUS needs a causal model")
    interventions: dict[str, float] = {}
    noise: dict[str, float] = {}
    for assign in expr.assignments:
        value = eval_expr(ctx, assign.value, {})
        if not _is_number(value):
            raise EvaluationError(
                f"assignment to {assign.variable!r} must produce a number")
        if assign.is_noise:
            noise[assign.variable] = float(value)
        else:
            interventions[assign.variable] = float(value)
    env, flags = do_values(ctx.cdah, interventions, noise if noise else None)
    for flag in flags:
        ctx.warn_once(flag)
    outputs = []
    for eq in expr.equations:
        outputs.append(eval_expr(ctx, eq, env))
    return outputs[0] if len(outputs) == 1 else outputs


def _project(ctx: _Ctx, items: tuple[Projection, ...], rows: list[dict]):
    columns = [_column_name(i) for i in items]
    if len(set(columns)) != len(columns):
        raise EvaluationError("projection columns must have distinct names")
    aggregates = [i for i in items if _is_aggregate(i.expr)]
    if not aggregates:
        out = []
        for b in rows:
            out.append({c: _eval_projection_cell(ctx, i.expr, b)
                        for c, i in zip(columns, items)})
        return columns, out

    # grouped aggregation: plain projections are the grouping key
    plain = [(c, i) for c, i in zip(columns, items) if not _is_aggregate(i.expr)]
    groups: dict = {}
    order: list = []
    for b in rows:
        key_cells = {c: _eval_projection_cell(ctx, i.expr, b) for c, i in plain}
        key = tuple(value_key(key_cells[c]) for c, _ in plain)
        if key not in groups:
            groups[key] = (key_cells, [])
            order.append(key)
        groups[key][1].append(b)
    out = []
    for key in order:
        key_cells, members = groups[key]
        cells = dict(key_cells)
        for c, i in zip(columns, items):
            if not _is_aggregate(i.expr):
                continue
            values = [eval_expr(ctx, i.expr.arg, b) for b in members]
            values = [v for v in values if v is not None]
            if i.expr.name == "count":
                cells[c] = len(values)
            else:
                seen = set()
                distinct = []
                for v in values:
                    k = value_key(v)
                    if k not in seen:
                        seen.add(k)
                        distinct.append(v)
                cells[c] = distinct
        out.append(cells)
    if not rows and not plain:
        # aggregates over no rows still produce one row
        out.append({c: (0 if i.expr.name == "count" else [])
                    for c, i in zip(columns, items)})
    return columns, out


# --- extraction ---------------------------------------------------------------------

@dataclass
class ExtractReport:
    created: dict[str, int] = field(default_factory=dict)
    total_members: dict[str, int] = field(default_factory=dict)
    new_edges: list[tuple[str, str]] = field(default_factory=list)
    rows: int = 0


def _collect_footprint(value, nodes: set, edges: set):
    if isinstance(value, NodeVal):
        nodes.add(value.node.id)
    elif isinstance(value, EdgeVal):
        edges.add(value.edge.id)
        nodes.add(value.edge.src)
        nodes.add(value.edge.dst)
    elif isinstance(value, PathVal):
        for n in value.nodes:
            _collect_footprint(n, nodes, edges)
        for e in value.edges:
            _collect_footprint(e, nodes, edges)
    # hypernodes, causal edges, and membership edges are not data elements


def _exec_extract(ctx: _Ctx, clause, rows: list[dict], query_text: str):
    pattern = clause.pattern
    node_pats = pattern.nodes()
    edge_pats = pattern.edges()
    base = ctx.cdah if ctx.cdah is not None else CDAH(over=ctx.snapshot)

    if isinstance(clause, MergeClause):
        ctx.warn_once(
            "MERGE deduplicates by anchor exactly like EXTRACT; duplicate "
            "hypernodes per variable are not representable")

    # gather members per variable, first row wins per anchor
    new_members: dict[str, dict[str, Member]] = {p.label: {} for p in node_pats}
    for b in rows:
        foot_nodes: set = set()
        foot_edges: set = set()
        for v in b.values():
            _collect_footprint(v, foot_nodes, foot_edges)
        for pat in node_pats:
            holder = b.get(pat.var)
            if not isinstance(holder, NodeVal):
                raise EvaluationError(
                    f"EXTRACT anchor {pat.var!r} must be bound to a graph node")
            anchor = holder.node.id
            bucket = new_members[pat.label]
            if anchor not in bucket:
                bucket[anchor] = Member(anchor=anchor,
                                        nodes=frozenset(foot_nodes),
                                        edges=frozenset(foot_edges))

    report = ExtractReport(rows=len(rows))
    out = base
    for pat in node_pats:
        existing = set()
        if pat.label in out.variables:
            existing = {m.anchor for m in out.variables[pat.label].members}
        added = 0
        if pat.label not in out.variables:
            out = out.upsert_hypernode(pat.label)
        for anchor in sorted(new_members[pat.label]):
            if anchor in existing:
                continue
            out = out.upsert_hypernode(pat.label, new_members[pat.label][anchor])
            added += 1
        report.created[pat.label] = added
        report.total_members[pat.label] = len(out.variables[pat.label].members)
        if added == 0 and not new_members[pat.label]:
            ctx.warn_once(f"EXTRACT produced no members for {pat.label!r}")
        out = out.with_origin(pat.label, query_text)

    for i, epat in enumerate(edge_pats):
        left = node_pats[i].label
        right = node_pats[i + 1].label
        src, dst = (left, right) if epat.direction == "out" else (right, left)
        before = (src, dst) in out.edges
        out = out.add_causal_edge(src, dst)
        if not before:
            report.new_edges.append((src, dst))

    if out.over is not ctx.snapshot:
        from dataclasses import replace as _replace
        out = _replace(out, over=ctx.snapshot)
    return out, report


# --- top-level evaluation --------------------------------------------------------------

@dataclass
class QueryResult:
    columns: list[str]
    rows: list[dict]
    warnings: list[str]
    kind: str = "table"                   # "table" | "extract"
    cdah: CDAH | None = None
    report: ExtractReport | None = None

    def tuples(self) -> list[tuple]:
        return [tuple(r[c] for c in self.columns) for r in self.rows]

    def rendered(self) -> list[dict]:
        return [{c: render_value(r[c]) for c in self.columns} for r in self.rows]


def evaluate(query, snapshot: GraphSnapshot, cdah: CDAH | None = None, *,
             max_paths: int = DEFAULT_MAX_PATHS) -> QueryResult:
    """Run one query against a snapshot and optional causal model.

    ``query`` may be text or an already parsed tree. EXTRACT/MERGE results
    carry the new model in ``result.cdah``; the input model is never mutated.
    """
    if isinstance(query, str):
        text = query
        ast = parse(query)
    else:
        ast = query
        from .parser import pretty_print, validate_query
        validate_query(ast)
        text = pretty_print(ast)

    ctx = _Ctx(snapshot, cdah, max_paths)
    rows: list[dict] = [{}]
    for clause in ast.clauses:
        if isinstance(clause, MatchClause):
            nxt: list[dict] = []
            for b in rows:
                nxt.extend(_match_clause(ctx, clause, b))
            rows = nxt
        elif isinstance(clause, WithClause):
            _, rows = _project(ctx, clause.items, rows)
        elif isinstance(clause, ReturnClause):
            columns, out_rows = _project(ctx, clause.items, rows)
            return QueryResult(columns, out_rows, ctx.warnings)
        elif isinstance(clause, (ExtractClause, MergeClause)):
            new_cdah, report = _exec_extract(ctx, clause, rows, text)
            return QueryResult(
                ["variable", "members", "added"],
                [{"variable": v, "members": report.total_members[v],
                  "added": report.created[v]} for v in report.total_members],
                ctx.warnings, kind="extract", cdah=new_cdah, report=report)
        else:  # pragma: no cover - parser only emits the clauses above
            raise EvaluationError(f"cannot evaluate clause {clause!r}")
    raise EvaluationError("query ended without a terminal clause")  # pragma: no cover
