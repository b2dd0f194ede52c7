"""Abstract syntax for the pattern query language.

Positions are carried for diagnostics but excluded from equality, so a parsed
tree compares equal to a programmatically built one and round-trip tests can
use plain ``==``.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def _pos_field():
    return field(default=None, compare=False, repr=False)


# --- patterns ---------------------------------------------------------------

@dataclass(frozen=True)
class NodePattern:
    var: str | None = None
    label: str | None = None
    props: tuple = ()  # ((key, literal value), ...)
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class EdgePattern:
    direction: str = "out"  # "out": left node -> right node; "in": the reverse
    var: str | None = None
    type: str | None = None
    star: bool = False      # Kleene repetition: a simple path of 0 or more hops
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class PatternChain:
    """Alternating nodes and edges, starting and ending with a node."""

    elements: tuple  # (NodePattern, EdgePattern, NodePattern, ...)
    name: str | None = None
    pos: tuple | None = _pos_field()

    def nodes(self) -> list[NodePattern]:
        return [e for e in self.elements if isinstance(e, NodePattern)]

    def edges(self) -> list[EdgePattern]:
        return [e for e in self.elements if isinstance(e, EdgePattern)]


# --- expressions --------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: object
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class VarRef:
    name: str
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class PropRef:
    var: str
    key: str
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class Unary:
    op: str  # "-" | "NOT"
    operand: object
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class Binary:
    op: str  # arithmetic + - * / ; comparison = <> < > <= >= ; AND OR
    left: object
    right: object
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class FuncCall:
    name: str  # "labels" | "count" | "distinct"
    arg: object
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class ExistsExpr:
    patterns: tuple  # (PatternChain, ...)
    where: object | None = None
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class ProbTerm:
    variable: str
    value: str | None = None  # category label, None for "all values"


@dataclass(frozen=True)
class ProbabilityExpr:
    target: ProbTerm
    conditions: tuple = ()  # (ProbTerm, ...)
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class DoAssign:
    variable: str
    value: object  # expression
    is_noise: bool = False  # eps(VAR) = expr


@dataclass(frozen=True)
class DoCalcExpr:
    assignments: tuple  # (DoAssign, ...)
    equations: tuple    # expressions evaluating to equation text
    pos: tuple | None = _pos_field()


# --- clauses -------------------------------------------------------------------

@dataclass(frozen=True)
class MatchMode:
    kind: str = "plain"  # "plain" | "all" | "shortest"
    k: int | None = None


PLAIN = MatchMode("plain")
ALL = MatchMode("all")


@dataclass(frozen=True)
class MatchClause:
    patterns: tuple  # (PatternChain, ...)
    mode: MatchMode = PLAIN
    where: object | None = None
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class ExtractClause:
    pattern: PatternChain
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class MergeClause:
    pattern: PatternChain
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class Projection:
    expr: object
    alias: str | None = None


@dataclass(frozen=True)
class WithClause:
    items: tuple  # (Projection, ...)
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class ReturnClause:
    items: tuple
    pos: tuple | None = _pos_field()


@dataclass(frozen=True)
class QueryAst:
    clauses: tuple


def walk_expr(expr):
    """Yield every expression node in the tree rooted at ``expr``."""
    if expr is None:
        return
    yield expr
    if isinstance(expr, Unary):
        yield from walk_expr(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, FuncCall):
        yield from walk_expr(expr.arg)
    elif isinstance(expr, ExistsExpr):
        yield from walk_expr(expr.where)
    elif isinstance(expr, DoCalcExpr):
        for a in expr.assignments:
            yield from walk_expr(a.value)
        for e in expr.equations:
            yield from walk_expr(e)
