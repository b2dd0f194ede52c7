"""Keeping an extracted model in step with its evolving graph.

Each variable records the query that extracted it. Those origin queries are
mined for watch patterns (labels, types, identifying property constraints)
so that an update receipt can be classified cheaply: no watched element
touched means nothing to do.

When something fired, the structural layer (members and causal edges) is
recomputed by replaying every origin query against the new snapshot; that is
exactly what a batch rebuild would produce, so incremental and batch never
diverge structurally. Distribution work is then restricted to edges whose
endpoints were affected. An edge whose association collapsed is dropped and
its neighborhood rescanned for replacement candidates. Note that a dropped
edge reappears on the next structural recompute unless its origin query is
retired; dropping is a distribution-level action, not an edit of provenance.

Escalation to a full rebuild happens only when the variable set itself
changes, which incremental bookkeeping cannot patch in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .analysis import scan_associations, validate_edge
from .cdah import CDAH, CausalEdge
from .errors import (
    InsufficientDataError,
    MissingOriginError,
    NonNumericVariableError,
    RankDeficiencyError,
    ReceiptLineageError,
)
from .estimation import estimate_cpd
from .graph import GraphSnapshot, UpdateReceipt
from .query.ast import Binary, ExtractClause, Lit, MatchClause, MergeClause, PropRef
from .query.parser import parse
from .scm import fit_linear


# --- triggers -----------------------------------------------------------------

@dataclass(frozen=True)
class NodeWatch:
    label: str | None
    props: tuple = ()  # (key, value) pairs that identify the node


@dataclass(frozen=True)
class EdgeWatch:
    type: str | None


@dataclass(frozen=True)
class Trigger:
    variable: str
    query_text: str
    node_watches: tuple = ()
    edge_watches: tuple = ()


def _equality_constants(where, var: str) -> list[tuple[str, object]]:
    """Top-level AND-joined ``var.key = literal`` constraints in a WHERE."""
    out = []

    def visit(expr):
        if isinstance(expr, Binary) and expr.op == "AND":
            visit(expr.left)
            visit(expr.right)
            return
        if isinstance(expr, Binary) and expr.op == "=":
            left, right = expr.left, expr.right
            if isinstance(right, PropRef) and isinstance(left, Lit):
                left, right = right, left
            if isinstance(left, PropRef) and isinstance(right, Lit) and left.var == var:
                out.append((left.key, right.value))

    if where is not None:
        visit(where)
    return out


def derive_triggers(cdah: CDAH) -> list[Trigger]:
    """Mine each origin query for the elements the variable depends on.

    When the extract pattern has exactly one node per matched chain, the
    watches narrow to the chain that grounds this variable; otherwise every
    chain of the query is watched.
    """
    triggers = []
    for variable, text in cdah.origins:
        ast = parse(text)
        terminal = ast.clauses[-1]
        if not isinstance(terminal, (ExtractClause, MergeClause)):
            raise MissingOriginError(
                f"origin for {variable!r} is not an extraction query")
        extract_nodes = terminal.pattern.nodes()
        chains = []
        for clause in ast.clauses:
            if isinstance(clause, MatchClause):
                for chain in clause.patterns:
                    chains.append((chain, clause.where))

        mine = [i for i, p in enumerate(extract_nodes) if p.label == variable]
        if len(extract_nodes) == len(chains) and len(mine) == 1:
            watched = [chains[mine[0]]]
        else:
            watched = chains

        # a bare re-reference like (p) carries the label p was declared with
        declared: dict[str, str] = {}
        for chain, _ in chains:
            for pat in chain.nodes():
                if pat.var and pat.label and pat.var not in declared:
                    declared[pat.var] = pat.label

        node_watches = []
        edge_watches = []
        for chain, where in watched:
            for pat in chain.nodes():
                props = list(pat.props)
                if pat.var:
                    props.extend(_equality_constants(where, pat.var))
                label = pat.label or (declared.get(pat.var) if pat.var else None)
                node_watches.append(NodeWatch(label, tuple(sorted(set(props),
                                                                  key=repr))))
            for pat in chain.edges():
                edge_watches.append(EdgeWatch(pat.type))
        triggers.append(Trigger(variable, text,
                                tuple(node_watches), tuple(edge_watches)))
    return triggers


def _props_subset(want: tuple, props: dict) -> bool:
    for key, value in want:
        if key not in props:
            return False
        have = props[key]
        if isinstance(have, bool) != isinstance(value, bool) or have != value:
            return False
    return True


def _watch_hits_node(watch: NodeWatch, record) -> bool:
    if watch.label is not None and watch.label not in record.labels:
        return False
    return _props_subset(watch.props, record.props)


def _watch_hits_edge(watch: EdgeWatch, record) -> bool:
    return watch.type is None or watch.type == record.type


def fires(trigger: Trigger, receipt: UpdateReceipt) -> bool:
    """Does any receipt item touch an element this trigger watches?

    Both the before and after states are checked, so renaming an identifying
    property away still fires.
    """
    for item in receipt.items:
        states = [s for s in (item.before, item.after) if s is not None]
        if item.kind in ("add_node", "remove_node", "set_node_prop"):
            for watch in trigger.node_watches:
                if any(_watch_hits_node(watch, s) for s in states):
                    return True
        else:
            for watch in trigger.edge_watches:
                if any(_watch_hits_edge(watch, s) for s in states):
                    return True
    return False


# --- structural replay ------------------------------------------------------------

def _origin_texts(cdah: CDAH) -> list[str]:
    seen = set()
    texts = []
    for _, text in cdah.origins:
        if text not in seen:
            seen.add(text)
            texts.append(text)
    return texts


def _replay_structure(cdah: CDAH, snapshot: GraphSnapshot) -> CDAH:
    """Members and causal edges as a batch rebuild would produce them,
    with rules, equations, and stored distributions carried over.

    Edges added by hand (no extract chain behind them) are kept as long as
    both endpoints survive. Edges that were dropped from the model but are
    still implied by an origin query reappear here; dropping is a
    distribution-level action, not an edit of provenance.
    """
    from .query.engine import evaluate

    if not cdah.origins:
        raise MissingOriginError("model records no origin queries to replay")
    model = CDAH(over=snapshot)
    for text in _origin_texts(cdah):
        result = evaluate(text, snapshot, model)
        model = result.cdah
    for name in sorted(model.variables):
        old = cdah.variables.get(name)
        if old is None:
            continue
        if old.value_rule is not None:
            model = model.set_value_rule(name, old.value_rule)
        if old.equation is not None:
            model = model.set_equation(name, old.equation)
    for key in sorted(cdah.edges):
        src, dst = key
        if key not in model.edges:
            if src not in model.variables or dst not in model.variables:
                continue
            model = model.add_causal_edge(src, dst)
        stored = cdah.edges[key]
        model = model.set_edge(CausalEdge(src=src, dst=dst,
                                          support=stored.support,
                                          cpd=stored.cpd, ipd=stored.ipd))
    return model


def rebuild(cdah: CDAH, snapshot: GraphSnapshot) -> CDAH:
    """Batch path: replay origins, keep rules and equations of surviving
    variables, and estimate every edge fresh."""
    model = _replay_structure(cdah, snapshot)
    # replay carried stored tables over; a rebuild re-estimates everything
    for key in sorted(model.edges):
        dist, support = estimate_cpd(model, key[0], key[1], snapshot)
        model = model.set_edge(CausalEdge(src=key[0], dst=key[1],
                                          support=support, cpd=dist,
                                          ipd=model.edges[key].ipd))
    return model


# --- incremental update --------------------------------------------------------------

@dataclass(frozen=True)
class MaintenanceAction:
    kind: str                     # refreshed | edge_dropped | association_rescan
    src: str | None = None        # | unsupported | equation_refit | equation_kept
    dst: str | None = None
    variable: str | None = None
    candidates: tuple = ()
    detail: str = ""


@dataclass
class MaintenanceOutcome:
    kind: str                     # unchanged | incremental | full_rebuild
    cdah: CDAH
    fired: list[str] = field(default_factory=list)
    actions: list[MaintenanceAction] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def check_receipt(receipt: UpdateReceipt, snapshot: GraphSnapshot) -> None:
    if receipt.lineage != snapshot.lineage:
        raise ReceiptLineageError(
            f"receipt lineage {receipt.lineage!r} does not match snapshot "
            f"{snapshot.lineage!r}")
    if receipt.revision != snapshot.revision:
        raise ReceiptLineageError(
            f"receipt revision {receipt.revision} does not match snapshot "
            f"revision {snapshot.revision}")


def _anchor_sets(model: CDAH) -> dict[str, frozenset]:
    return {name: frozenset(m.anchor for m in node.members)
            for name, node in model.variables.items()}


def on_update(cdah: CDAH, receipt: UpdateReceipt, snapshot: GraphSnapshot, *,
              tau: float = 0.05, rho: float = 0.1) -> MaintenanceOutcome:
    """Classify one update receipt and repair the model accordingly."""
    check_receipt(receipt, snapshot)
    triggers = derive_triggers(cdah)
    fired = sorted({t.variable for t in triggers if fires(t, receipt)})
    if not fired:
        return MaintenanceOutcome("unchanged", cdah)

    new_model = _replay_structure(cdah, snapshot)
    if set(new_model.variables) != set(cdah.variables):
        rebuilt = rebuild(cdah, snapshot)
        gone = sorted(set(cdah.variables) - set(rebuilt.variables))
        born = sorted(set(rebuilt.variables) - set(cdah.variables))
        detail = []
        if gone:
            detail.append("lost " + ", ".join(gone))
        if born:
            detail.append("gained " + ", ".join(born))
        return MaintenanceOutcome(
            "full_rebuild", rebuilt, fired,
            [MaintenanceAction("full_rebuild", detail="; ".join(detail))])

    before_anchors = _anchor_sets(cdah)
    after_anchors = _anchor_sets(new_model)
    affected = set(fired)
    affected |= {v for v in after_anchors if after_anchors[v] != before_anchors[v]}

    actions: list[MaintenanceAction] = []
    warnings: list[str] = []
    refreshed_targets: set[str] = set()
    for src, dst in sorted(new_model.edges):
        if src not in affected and dst not in affected:
            continue
        verdict = validate_edge(new_model, src, dst, snapshot, tau=tau, rho=rho)
        if verdict.verdict == "unsupported":
            actions.append(MaintenanceAction("unsupported", src=src, dst=dst,
                                             detail="no co-grounded units"))
            continue
        if verdict.verdict == "drifted" and verdict.dependence < rho:
            new_model = new_model.drop_edge(src, dst)
            actions.append(MaintenanceAction(
                "edge_dropped", src=src, dst=dst,
                detail=f"dependence {verdict.dependence:.4f} below {rho}"))
            neighborhood = {src, dst}
            for s, d in new_model.edges:
                if s in (src, dst):
                    neighborhood.add(d)
                if d in (src, dst):
                    neighborhood.add(s)
            candidates = scan_associations(new_model, snapshot,
                                           sorted(neighborhood), rho=rho)
            actions.append(MaintenanceAction(
                "association_rescan", src=src, dst=dst,
                candidates=tuple((c.a, c.b, c.dependence) for c in candidates)))
            continue
        # valid or drifted-but-dependent: install the fresh table
        new_model = new_model.set_edge(CausalEdge(
            src=src, dst=dst, support=verdict.support, cpd=verdict.fresh,
            ipd=new_model.edges[(src, dst)].ipd))
        actions.append(MaintenanceAction(
            "refreshed", src=src, dst=dst,
            detail=f"tv {verdict.tv:.4f}, dependence {verdict.dependence:.4f}"))
        refreshed_targets.add(dst)

    for target in sorted(refreshed_targets):
        node = new_model.variables[target]
        if node.equation is None:
            continue
        try:
            new_model = fit_linear(new_model, target, snapshot=snapshot)
            actions.append(MaintenanceAction("equation_refit", variable=target))
        except (InsufficientDataError, NonNumericVariableError,
                RankDeficiencyError) as err:
            warnings.append(f"kept stale equation for {target}: {err}")
            actions.append(MaintenanceAction("equation_kept", variable=target,
                                             detail=str(err)))

    return MaintenanceOutcome("incremental", new_model, fired, actions, warnings)
