"""In-memory property graph store with JSONL persistence and snapshots.

Nodes carry one or more labels plus scalar properties; edges are typed,
directed, and may be parallel. All mutation goes through ``apply_update``,
which validates first, applies atomically, and returns a receipt describing
exactly what was touched. Readers work from ``snapshot()`` views which are
never affected by later writes (node and edge records are immutable and
replaced wholesale on change, so a snapshot only copies the id maps).

File format: one JSON object per line. An optional header line
``{"kind": "header", "format": "pg/1"}`` may come first, then all nodes,
then all edges. Edges must appear after both their endpoints.
"""

from __future__ import annotations

import json
import math
import uuid
from dataclasses import dataclass, field, replace

from .errors import (
    DanglingEndpointError,
    DuplicateIdError,
    GraphFormatError,
    UnknownIdError,
    ValueDomainError,
)

Scalar = str | int | float | bool | None

FILE_FORMAT = "pg/1"


def check_scalar(value, where: str = "property"):
    """Validate a property value: str, int, bool, finite float, or None."""
    if value is None or isinstance(value, (str, bool, int)):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueDomainError(f"non-finite float in {where}")
        return value
    raise ValueDomainError(f"unsupported value type {type(value).__name__} in {where}")


def check_props(props: dict, where: str = "properties") -> dict:
    if not isinstance(props, dict):
        raise ValueDomainError(f"{where} must be an object")
    for k, v in props.items():
        if not isinstance(k, str) or not k:
            raise ValueDomainError(f"{where} keys must be non-empty strings")
        check_scalar(v, f"{where}[{k!r}]")
    return dict(props)


@dataclass(frozen=True)
class Node:
    id: str
    labels: frozenset[str]
    props: dict

    def has_label(self, label: str) -> bool:
        return label in self.labels


@dataclass(frozen=True)
class Edge:
    id: str
    type: str
    src: str
    dst: str
    props: dict


# --- updates and receipts -------------------------------------------------

@dataclass(frozen=True)
class AddNode:
    labels: tuple[str, ...]
    props: dict = field(default_factory=dict)
    id: str | None = None


@dataclass(frozen=True)
class RemoveNode:
    id: str


@dataclass(frozen=True)
class AddEdge:
    type: str
    src: str
    dst: str
    props: dict = field(default_factory=dict)
    id: str | None = None


@dataclass(frozen=True)
class RemoveEdge:
    id: str


@dataclass(frozen=True)
class SetNodeProperty:
    id: str
    key: str
    value: Scalar


@dataclass(frozen=True)
class SetEdgeProperty:
    id: str
    key: str
    value: Scalar


GraphUpdate = AddNode | RemoveNode | AddEdge | RemoveEdge | SetNodeProperty | SetEdgeProperty


@dataclass(frozen=True)
class ReceiptItem:
    """One touched element: the element state before and after the change."""

    kind: str  # add_node | remove_node | add_edge | remove_edge | set_node_prop | set_edge_prop
    before: Node | Edge | None
    after: Node | Edge | None
    key: str | None = None

    @property
    def element_id(self) -> str:
        el = self.after if self.after is not None else self.before
        return el.id


@dataclass(frozen=True)
class UpdateReceipt:
    lineage: str
    revision: int
    items: tuple[ReceiptItem, ...]

    def touched_labels(self) -> frozenset[str]:
        out: set[str] = set()
        for it in self.items:
            for el in (it.before, it.after):
                if isinstance(el, Node):
                    out |= el.labels
        return frozenset(out)

    def touched_types(self) -> frozenset[str]:
        out: set[str] = set()
        for it in self.items:
            for el in (it.before, it.after):
                if isinstance(el, Edge):
                    out.add(el.type)
        return frozenset(out)


def update_from_json(obj: dict) -> GraphUpdate:
    """Decode one update from its JSON form (used by the updates file)."""
    if not isinstance(obj, dict) or "op" not in obj:
        raise GraphFormatError("update must be an object with an 'op' field")
    op = obj["op"]
    try:
        if op == "add_node":
            return AddNode(tuple(obj["labels"]), dict(obj.get("props", {})), obj.get("id"))
        if op == "remove_node":
            return RemoveNode(obj["id"])
        if op == "add_edge":
            return AddEdge(obj["type"], obj["src"], obj["dst"], dict(obj.get("props", {})), obj.get("id"))
        if op == "remove_edge":
            return RemoveEdge(obj["id"])
        if op == "set_node_prop":
            return SetNodeProperty(obj["id"], obj["key"], obj.get("value"))
        if op == "set_edge_prop":
            return SetEdgeProperty(obj["id"], obj["key"], obj.get("value"))
    except KeyError as exc:
        raise GraphFormatError(f"update {op!r} is missing field {exc}") from None
    raise GraphFormatError(f"unknown update op {op!r}")


# --- read-side API shared by the live store and snapshots -----------------

class _GraphReader:
    nodes: dict
    edges: dict
    _out: dict
    _in: dict

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownIdError(f"unknown node id {node_id!r}") from None

    def edge(self, edge_id: str) -> Edge:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise UnknownIdError(f"unknown edge id {edge_id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self.nodes

    def nodes_with_label(self, label: str) -> list[Node]:
        return [self.nodes[i] for i in sorted(self.nodes) if label in self.nodes[i].labels]

    def labels(self) -> set[str]:
        out: set[str] = set()
        for n in self.nodes.values():
            out |= n.labels
        return out

    def out_edges(self, node_id: str) -> list[Edge]:
        return [self.edges[e] for e in self._out.get(node_id, ())]

    def in_edges(self, node_id: str) -> list[Edge]:
        return [self.edges[e] for e in self._in.get(node_id, ())]

    def node_count(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class GraphSnapshot(_GraphReader):
    """Immutable view of the graph at one revision."""

    nodes: dict
    edges: dict
    _out: dict
    _in: dict
    lineage: str
    revision: int


class PropertyGraph(_GraphReader):
    """Mutable single-writer store. Readers should use ``snapshot()``."""

    def __init__(self):
        self.nodes: dict[str, Node] = {}
        self.edges: dict[str, Edge] = {}
        self._out: dict[str, list[str]] = {}
        self._in: dict[str, list[str]] = {}
        self.lineage = uuid.uuid4().hex
        self.revision = 0
        self._next_id = 0

    # -- mutation ----------------------------------------------------------

    def _fresh_id(self, prefix: str) -> str:
        while True:
            candidate = f"{prefix}{self._next_id}"
            self._next_id += 1
            if candidate not in self.nodes and candidate not in self.edges:
                return candidate

    def apply_update(self, update: GraphUpdate) -> UpdateReceipt:
        """Apply one update atomically; returns the receipt of what changed."""
        items = self._apply(update)
        self.revision += 1
        return UpdateReceipt(self.lineage, self.revision, tuple(items))

    def _apply(self, update: GraphUpdate) -> list[ReceiptItem]:
        if isinstance(update, AddNode):
            labels = frozenset(update.labels)
            if not labels or not all(isinstance(l, str) and l for l in labels):
                raise ValueDomainError("a node needs at least one non-empty label")
            props = check_props(update.props, "node properties")
            node_id = update.id if update.id is not None else self._fresh_id("n")
            if node_id in self.nodes:
                raise DuplicateIdError(f"node id {node_id!r} already exists")
            node = Node(node_id, labels, props)
            self.nodes[node_id] = node
            self._out.setdefault(node_id, [])
            self._in.setdefault(node_id, [])
            return [ReceiptItem("add_node", None, node)]

        if isinstance(update, AddEdge):
            if not update.type or not isinstance(update.type, str):
                raise ValueDomainError("edge type must be a non-empty string")
            if update.src not in self.nodes:
                raise DanglingEndpointError(f"edge source {update.src!r} does not exist")
            if update.dst not in self.nodes:
                raise DanglingEndpointError(f"edge target {update.dst!r} does not exist")
            props = check_props(update.props, "edge properties")
            edge_id = update.id if update.id is not None else self._fresh_id("e")
            if edge_id in self.edges:
                raise DuplicateIdError(f"edge id {edge_id!r} already exists")
            edge = Edge(edge_id, update.type, update.src, update.dst, props)
            self.edges[edge_id] = edge
            self._out[update.src].append(edge_id)
            self._in[update.dst].append(edge_id)
            return [ReceiptItem("add_edge", None, edge)]

        if isinstance(update, RemoveNode):
            node = self.node(update.id)
            items: list[ReceiptItem] = []
            # cascade: drop incident edges first, so the receipt lists them
            for edge_id in list(self._out[update.id]) + list(self._in[update.id]):
                if edge_id in self.edges:
                    items.extend(self._apply(RemoveEdge(edge_id)))
            del self.nodes[update.id]
            del self._out[update.id]
            del self._in[update.id]
            items.append(ReceiptItem("remove_node", node, None))
            return items

        if isinstance(update, RemoveEdge):
            edge = self.edge(update.id)
            del self.edges[update.id]
            self._out[edge.src].remove(update.id)
            self._in[edge.dst].remove(update.id)
            return [ReceiptItem("remove_edge", edge, None)]

        if isinstance(update, SetNodeProperty):
            node = self.node(update.id)
            check_scalar(update.value, f"node property {update.key!r}")
            props = dict(node.props)
            props[update.key] = update.value
            new = replace(node, props=props)
            self.nodes[update.id] = new
            return [ReceiptItem("set_node_prop", node, new, key=update.key)]

        if isinstance(update, SetEdgeProperty):
            edge = self.edge(update.id)
            check_scalar(update.value, f"edge property {update.key!r}")
            props = dict(edge.props)
            props[update.key] = update.value
            new = replace(edge, props=props)
            self.edges[update.id] = new
            return [ReceiptItem("set_edge_prop", edge, new, key=update.key)]

        raise ValueDomainError(f"unknown update type {type(update).__name__}")

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> GraphSnapshot:
        return GraphSnapshot(
            nodes=dict(self.nodes),
            edges=dict(self.edges),
            _out={k: tuple(v) for k, v in self._out.items()},
            _in={k: tuple(v) for k, v in self._in.items()},
            lineage=self.lineage,
            revision=self.revision,
        )


# --- persistence ----------------------------------------------------------

def _decode_line(line: str, lineno: int) -> dict:
    def reject_const(_):
        raise GraphFormatError(f"line {lineno}: non-finite numbers are not allowed")

    try:
        obj = json.loads(line, parse_constant=reject_const)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise GraphFormatError(f"line {lineno}: expected a JSON object")
    return obj


def ingest(path: str) -> PropertyGraph:
    """Load a graph from a JSONL file. Nodes must precede the edges that use them."""
    g = PropertyGraph()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            obj = _decode_line(line, lineno)
            kind = obj.get("kind")
            try:
                if kind == "header":
                    continue
                if kind == "node":
                    g.apply_update(AddNode(tuple(obj["labels"]), dict(obj.get("props", {})), obj["id"]))
                elif kind == "edge":
                    g.apply_update(AddEdge(obj["type"], obj["src"], obj["dst"], dict(obj.get("props", {})), obj["id"]))
                else:
                    raise GraphFormatError(f"line {lineno}: unknown kind {kind!r}")
            except KeyError as exc:
                raise GraphFormatError(f"line {lineno}: missing field {exc}") from None
            except (ValueDomainError, DuplicateIdError, DanglingEndpointError) as exc:
                raise type(exc)(f"line {lineno}: {exc.args[0]}") from None
    g.revision = 0
    return g


def export(g: _GraphReader, path: str) -> None:
    """Write the graph as JSONL: header, nodes (sorted by id), then edges."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "header", "format": FILE_FORMAT}) + "\n")
        for node_id in sorted(g.nodes):
            n = g.nodes[node_id]
            rec = {"kind": "node", "id": n.id, "labels": sorted(n.labels), "props": _sorted_props(n.props)}
            fh.write(json.dumps(rec) + "\n")
        for edge_id in sorted(g.edges):
            e = g.edges[edge_id]
            rec = {"kind": "edge", "id": e.id, "type": e.type, "src": e.src, "dst": e.dst,
                   "props": _sorted_props(e.props)}
            fh.write(json.dumps(rec) + "\n")


def _sorted_props(props: dict) -> dict:
    return {k: props[k] for k in sorted(props)}


def canonical_form(g: _GraphReader) -> tuple:
    """Identifier-free canonical form used to compare graphs up to renaming.

    Nodes become (labels, properties) records; each edge becomes
    (type, properties, source record, target record). Equal multisets mean
    the graphs have the same labeled topology.
    """
    def node_key(n: Node):
        return (tuple(sorted(n.labels)), tuple(sorted((k, repr(v)) for k, v in n.props.items())))

    node_keys = sorted(node_key(n) for n in g.nodes.values())
    edge_keys = sorted(
        (e.type,
         tuple(sorted((k, repr(v)) for k, v in e.props.items())),
         node_key(g.nodes[e.src]),
         node_key(g.nodes[e.dst]))
        for e in g.edges.values()
    )
    return (tuple(node_keys), tuple(edge_keys))
