"""Tokenizer, recursive-descent parser, validator, and printer for queries.

Grammar sketch (keywords are case-insensitive, identifiers are not; backticks
quote names that are not plain identifiers, such as labels with spaces):

    query    := clause+
    clause   := match | extract | merge | with | return
    match    := MATCH [ALL | SHORTEST k] chain ("," chain)* [WHERE expr]
    chain    := [name "="] node (edge node)*
    node     := "(" [var] [":" name] [props] ")"
    edge     := ("-->" | "<--" | "-[" inner "]->" | "<-[" inner "]-") [star]
    inner    := var | ":" name | var ":" name      (bare BELONGS means the type)
    star     := "*" | "{*}"
    extract  := EXTRACT chain
    merge    := MERGE chain
    with     := WITH proj ("," proj)*
    return   := RETURN proj ("," proj)*
    proj     := expr [AS name]

Expressions cover literals, variable and property references, arithmetic,
comparisons, NOT/AND/OR, EXISTS { ... } subqueries, labels(), count(),
distinct(), and the two statistics operators PROBABILITY(...) and
DO_CALCULUS([...],[...]), which are only legal as top-level projections.

``parse`` rejects structurally invalid queries up front: misplaced clauses,
unbound variable references, and misplaced statistics operators all fail here
rather than at evaluation time.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from ..errors import (
    MisplacedClauseError,
    MisplacedOperatorError,
    QuerySyntaxError,
    UnboundVariableError,
)
from .ast import (
    ALL,
    Binary,
    DoAssign,
    DoCalcExpr,
    EdgePattern,
    ExistsExpr,
    ExtractClause,
    FuncCall,
    Lit,
    MatchClause,
    MatchMode,
    MergeClause,
    NodePattern,
    PatternChain,
    PLAIN,
    ProbabilityExpr,
    ProbTerm,
    Projection,
    PropRef,
    QueryAst,
    ReturnClause,
    Unary,
    VarRef,
    WithClause,
    walk_expr,
)

KEYWORDS = {
    "MATCH", "ALL", "SHORTEST", "WHERE", "WITH", "RETURN", "EXTRACT", "MERGE",
    "AS", "AND", "OR", "NOT", "EXISTS", "TRUE", "FALSE", "NULL",
    "COUNT", "DISTINCT", "LABELS", "PROBABILITY", "DO_CALCULUS", "EPS",
}

# the virtual membership relationship: bare inside an edge bracket it always
# names the type, never a variable
BELONGS = "BELONGS"

_PLAIN_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NUMBER = re.compile(r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

_OPS = ["-->", "<--", "<-[", "]->", "<=", ">=", "<>", "-[", "]-",
        "(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "=", "<", ">",
        "+", "-", "*", "/", "|"]

_ESCAPES = {'"': '"', "'": "'", "\\": "\\", "/": "/", "n": "\n", "t": "\t",
            "r": "\r", "b": "\b", "f": "\f"}


@dataclass(frozen=True)
class Token:
    kind: str   # IDENT, BTICK, NUMBER, STRING, EOF, or a literal operator
    text: str
    value: object
    line: int
    col: int

    def keyword(self) -> str | None:
        if self.kind == "IDENT" and self.text.upper() in KEYWORDS:
            return self.text.upper()
        return None


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1

    def advance(n: int):
        nonlocal pos, line, col
        for ch in text[pos:pos + n]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        pos += n

    while pos < len(text):
        ch = text[pos]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", pos):
            end = text.find("\n", pos)
            advance((end - pos) if end != -1 else len(text) - pos)
            continue
        if ch.isdigit():
            m = _NUMBER.match(text, pos)
            raw = m.group(0)
            value = int(raw) if re.fullmatch(r"\d+", raw) else float(raw)
            tokens.append(Token("NUMBER", raw, value, line, col))
            advance(len(raw))
            continue
        if ch.isalpha() or ch == "_":
            m = _IDENT.match(text, pos)
            raw = m.group(0)
            tokens.append(Token("IDENT", raw, raw, line, col))
            advance(len(raw))
            continue
        if ch == "`":
            end = text.find("`", pos + 1)
            if end == -1:
                raise QuerySyntaxError("unterminated backtick name", line, col)
            inner = text[pos + 1:end]
            if not inner:
                raise QuerySyntaxError("empty backtick name", line, col)
            tokens.append(Token("BTICK", inner, inner, line, col))
            advance(end + 1 - pos)
            continue
        if ch in "\"'":
            value, length = _scan_string(text, pos, line, col)
            tokens.append(Token("STRING", text[pos:pos + length], value, line, col))
            advance(length)
            continue
        for op in _OPS:
            if text.startswith(op, pos):
                tokens.append(Token(op, op, op, line, col))
                advance(len(op))
                break
        else:
            raise QuerySyntaxError(f"unexpected character {ch!r}", line, col)

    tokens.append(Token("EOF", "", None, line, col))
    return _merge_do_calculus(tokens)


def _scan_string(text: str, start: int, line: int, col: int) -> tuple[str, int]:
    quote = text[start]
    out: list[str] = []
    i = start + 1
    while i < len(text):
        ch = text[i]
        if ch == quote:
            return "".join(out), i + 1 - start
        if ch == "\n":
            break
        if ch == "\\":
            if i + 1 >= len(text):
                break
            esc = text[i + 1]
            if esc in _ESCAPES:
                out.append(_ESCAPES[esc])
                i += 2
                continue
            if esc == "u" and i + 5 < len(text):
                try:
                    out.append(chr(int(text[i + 2:i + 6], 16)))
                except ValueError:
                    raise QuerySyntaxError("bad \\u escape in string", line, col) from None
                i += 6
                continue
            raise QuerySyntaxError(f"unknown escape \\{esc} in string", line, col)
        out.append(ch)
        i += 1
    raise QuerySyntaxError("unterminated string literal", line, col)


def _merge_do_calculus(tokens: list[Token]) -> list[Token]:
    """Fold the spelled variant DO-CALCULUS into one DO_CALCULUS token."""
    out: list[Token] = []
    i = 0
    while i < len(tokens):
        t = tokens[i]
        if (t.kind == "IDENT" and t.text.upper() == "DO" and i + 2 < len(tokens)
                and tokens[i + 1].kind == "-" and tokens[i + 2].kind == "IDENT"
                and tokens[i + 2].text.upper() == "CALCULUS"):
            out.append(Token("IDENT", "DO_CALCULUS", "DO_CALCULUS", t.line, t.col))
            i += 3
            continue
        out.append(t)
        i += 1
    return out


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def take(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def accept(self, kind: str) -> Token | None:
        if self.peek().kind == kind:
            return self.take()
        return None

    def accept_kw(self, *keywords: str) -> Token | None:
        if self.peek().keyword() in keywords:
            return self.take()
        return None

    def expect(self, kind: str, *also_expected: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            self.fail(f"found {tok.text!r}" if tok.kind != "EOF" else "found end of input",
                      tok, kind, *also_expected)
        return self.take()

    def expect_kw(self, *keywords: str) -> Token:
        tok = self.peek()
        if tok.keyword() not in keywords:
            self.fail(f"found {tok.text!r}" if tok.kind != "EOF" else "found end of input",
                      tok, *keywords)
        return self.take()

    def fail(self, message: str, tok: Token | None = None, *expected: str):
        tok = tok or self.peek()
        raise QuerySyntaxError(message, tok.line, tok.col, expected=expected,
                               found=tok.text or None)

    # -- names ---------------------------------------------------------------

    def name(self, what: str) -> tuple[str, Token]:
        """A label, variable, or causal-variable name: IDENT or backticks."""
        tok = self.peek()
        if tok.kind == "BTICK":
            return self.take().value, tok
        if tok.kind == "IDENT":
            if tok.keyword() is not None:
                self.fail(f"{tok.text!r} is a reserved word; backtick-quote it to use as a {what}",
                          tok, "identifier")
            return self.take().value, tok
        self.fail(f"expected a {what}", tok, "identifier")

    # -- clauses ---------------------------------------------------------------

    def query(self) -> QueryAst:
        clauses = []
        while self.peek().kind == ";":
            self.take()
        while self.peek().kind != "EOF":
            clauses.append(self.clause())
            while self.peek().kind == ";":
                if any(self.tokens[i].kind != ";" for i in range(self.pos, len(self.tokens) - 1)):
                    self.fail("';' separates queries; use parse_script for multi-query input")
                self.take()
        if not clauses:
            self.fail("empty query", self.peek(), "MATCH", "EXTRACT", "MERGE", "WITH", "RETURN")
        return QueryAst(tuple(clauses))

    def clause(self):
        tok = self.peek()
        kw = tok.keyword()
        if kw == "MATCH":
            return self.match_clause()
        if kw == "EXTRACT":
            self.take()
            return ExtractClause(self.pattern_chain(), pos=(tok.line, tok.col))
        if kw == "MERGE":
            self.take()
            return MergeClause(self.pattern_chain(), pos=(tok.line, tok.col))
        if kw == "WITH":
            self.take()
            return WithClause(self.projections(), pos=(tok.line, tok.col))
        if kw == "RETURN":
            self.take()
            return ReturnClause(self.projections(), pos=(tok.line, tok.col))
        self.fail("expected a clause", tok, "MATCH", "EXTRACT", "MERGE", "WITH", "RETURN")

    def match_clause(self) -> MatchClause:
        start = self.expect_kw("MATCH")
        mode = PLAIN
        if self.accept_kw("ALL"):
            mode = ALL
        elif self.accept_kw("SHORTEST"):
            k_tok = self.expect("NUMBER")
            if not isinstance(k_tok.value, int) or k_tok.value < 1:
                self.fail("SHORTEST needs a positive whole number", k_tok, "positive integer")
            mode = MatchMode("shortest", k_tok.value)
        patterns = [self.pattern_chain()]
        while self.accept(","):
            patterns.append(self.pattern_chain())
        where = None
        if self.accept_kw("WHERE"):
            where = self.expr()
        return MatchClause(tuple(patterns), mode=mode, where=where,
                           pos=(start.line, start.col))

    def projections(self) -> tuple:
        items = [self.projection()]
        while self.accept(","):
            items.append(self.projection())
        return tuple(items)

    def projection(self) -> Projection:
        expr = self.expr()
        alias = None
        if self.accept_kw("AS"):
            alias, _ = self.name("projection alias")
        return Projection(expr, alias)

    # -- patterns ---------------------------------------------------------------

    def pattern_chain(self) -> PatternChain:
        start = self.peek()
        name = None
        if (self.peek().kind in ("IDENT", "BTICK") and self.peek().keyword() is None
                and self.peek(1).kind == "=" and self.peek(2).kind == "("):
            name, _ = self.name("path name")
            self.expect("=")
        elements = [self.node_pattern()]
        while self.peek().kind in ("-->", "<--", "-[", "<-["):
            elements.append(self.edge_pattern())
            elements.append(self.node_pattern())
        return PatternChain(tuple(elements), name=name, pos=(start.line, start.col))

    def node_pattern(self) -> NodePattern:
        start = self.expect("(", "pattern node")
        var = label = None
        props: list[tuple[str, object]] = []
        if self.peek().kind in ("IDENT", "BTICK"):
            var, _ = self.name("variable")
        if self.accept(":"):
            label, _ = self.name("label")
        if self.accept("{"):
            if self.peek().kind != "}":
                props.append(self.prop_entry())
                while self.accept(","):
                    props.append(self.prop_entry())
            self.expect("}")
        self.expect(")")
        return NodePattern(var=var, label=label, props=tuple(props),
                           pos=(start.line, start.col))

    def prop_entry(self) -> tuple[str, object]:
        key, _ = self.name("property key")
        self.expect(":")
        return key, self.literal_value()

    def literal_value(self):
        tok = self.peek()
        if tok.kind == "STRING":
            return self.take().value
        if tok.kind == "NUMBER":
            return self.take().value
        if tok.kind == "-" and self.peek(1).kind == "NUMBER":
            self.take()
            return -self.take().value
        kw = tok.keyword()
        if kw == "TRUE":
            self.take()
            return True
        if kw == "FALSE":
            self.take()
            return False
        if kw == "NULL":
            self.take()
            return None
        self.fail("expected a literal value", tok, "string", "number", "true", "false", "null")

    def edge_pattern(self) -> EdgePattern:
        start = self.take()
        var = etype = None
        if start.kind == "-->":
            direction = "out"
        elif start.kind == "<--":
            direction = "in"
        elif start.kind in ("-[", "<-["):
            direction = "out" if start.kind == "-[" else "in"
            if self.peek().kind in ("IDENT", "BTICK") and self.peek().keyword() is None:
                inner, _ = self.name("edge variable")
                if inner == BELONGS and self.peek().kind != ":":
                    etype = BELONGS
                else:
                    var = inner
            if self.accept(":"):
                etype, _ = self.name("edge type")
            if direction == "out":
                self.expect("]->")
            else:
                self.expect("]-")
        else:  # pragma: no cover - callers check the lookahead
            self.fail("expected an edge", start, "-->", "<--", "-[", "<-[")
        star = False
        if self.accept("*"):
            star = True
        elif self.peek().kind == "{" and self.peek(1).kind == "*":
            self.take()
            self.take()
            self.expect("}")
            star = True
        return EdgePattern(direction=direction, var=var, type=etype, star=star,
                           pos=(start.line, start.col))

    # -- expressions ---------------------------------------------------------------

    def expr(self):
        return self.or_expr()

    def or_expr(self):
        node = self.and_expr()
        while True:
            tok = self.peek()
            if not self.accept_kw("OR"):
                return node
            node = Binary("OR", node, self.and_expr(), pos=(tok.line, tok.col))

    def and_expr(self):
        node = self.not_expr()
        while True:
            tok = self.peek()
            if not self.accept_kw("AND"):
                return node
            node = Binary("AND", node, self.not_expr(), pos=(tok.line, tok.col))

    def not_expr(self):
        tok = self.peek()
        if self.accept_kw("NOT"):
            return Unary("NOT", self.not_expr(), pos=(tok.line, tok.col))
        return self.cmp_expr()

    def cmp_expr(self):
        node = self.add_expr()
        tok = self.peek()
        if tok.kind in ("=", "<>", "<", ">", "<=", ">="):
            self.take()
            return Binary(tok.kind, node, self.add_expr(), pos=(tok.line, tok.col))
        return node

    def add_expr(self):
        node = self.mul_expr()
        while self.peek().kind in ("+", "-"):
            tok = self.take()
            node = Binary(tok.kind, node, self.mul_expr(), pos=(tok.line, tok.col))
        return node

    def mul_expr(self):
        node = self.unary_expr()
        while self.peek().kind in ("*", "/"):
            tok = self.take()
            node = Binary(tok.kind, node, self.unary_expr(), pos=(tok.line, tok.col))
        return node

    def unary_expr(self):
        tok = self.peek()
        if tok.kind == "-":
            self.take()
            if self.peek().kind == "NUMBER":
                # fold so "-3" is one literal, same as in property maps
                return Lit(-self.take().value, pos=(tok.line, tok.col))
            return Unary("-", self.unary_expr(), pos=(tok.line, tok.col))
        return self.primary()

    def primary(self):
        tok = self.peek()
        pos = (tok.line, tok.col)
        if tok.kind == "NUMBER" or tok.kind == "STRING":
            self.take()
            return Lit(tok.value, pos=pos)
        if tok.kind == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        kw = tok.keyword()
        if kw == "TRUE":
            self.take()
            return Lit(True, pos=pos)
        if kw == "FALSE":
            self.take()
            return Lit(False, pos=pos)
        if kw == "NULL":
            self.take()
            return Lit(None, pos=pos)
        if kw == "EXISTS":
            self.take()
            return self.exists_expr(pos)
        if kw in ("COUNT", "DISTINCT", "LABELS"):
            self.take()
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return FuncCall(kw.lower(), arg, pos=pos)
        if kw == "PROBABILITY":
            self.take()
            return self.probability_expr(pos)
        if kw == "DO_CALCULUS":
            self.take()
            return self.do_calculus_expr(pos)
        if tok.kind in ("IDENT", "BTICK"):
            if kw is not None:
                self.fail(f"{tok.text!r} is a reserved word here", tok, "expression")
            name, _ = self.name("variable")
            if self.peek().kind == "." and self.peek(1).kind in ("IDENT", "BTICK"):
                self.take()
                key, _ = self.name("property key")
                return PropRef(name, key, pos=pos)
            return VarRef(name, pos=pos)
        self.fail("expected an expression", tok, "expression")

    def exists_expr(self, pos) -> ExistsExpr:
        self.expect("{")
        self.accept_kw("MATCH")
        patterns = [self.pattern_chain()]
        while self.accept(","):
            patterns.append(self.pattern_chain())
        where = None
        if self.accept_kw("WHERE"):
            where = self.expr()
        self.expect("}")
        return ExistsExpr(tuple(patterns), where=where, pos=pos)

    def probability_expr(self, pos) -> ProbabilityExpr:
        self.expect("(")
        target = self.prob_term()
        conditions: list[ProbTerm] = []
        if self.accept("|"):
            conditions.append(self.prob_term())
            while self.accept(","):
                conditions.append(self.prob_term())
        self.expect(")")
        return ProbabilityExpr(target, tuple(conditions), pos=pos)

    def prob_term(self) -> ProbTerm:
        variable, _ = self.name("causal variable")
        value = None
        if self.accept("="):
            value = self.category_label()
        return ProbTerm(variable, value)

    def category_label(self) -> str:
        """A category in probability syntax: bare word, string, or number."""
        tok = self.peek()
        if tok.kind == "STRING":
            return self.take().value
        if tok.kind in ("IDENT", "BTICK") and tok.keyword() is None:
            label, _ = self.name("category")
            return label
        if tok.kind == "NUMBER" or (tok.kind == "-" and self.peek(1).kind == "NUMBER"):
            value = self.literal_value()
            return repr(value) if isinstance(value, float) else str(value)
        self.fail("expected a category value", tok, "identifier", "string", "number")

    def do_calculus_expr(self, pos) -> DoCalcExpr:
        self.expect("(")
        self.expect("[")
        assignments = [self.do_assignment()]
        while self.accept(","):
            assignments.append(self.do_assignment())
        self.expect("]")
        self.expect(",")
        self.expect("[")
        equations = [self.expr()]
        while self.accept(","):
            equations.append(self.expr())
        self.expect("]")
        self.expect(")")
        return DoCalcExpr(tuple(assignments), tuple(equations), pos=pos)

    def do_assignment(self) -> DoAssign:
        if self.peek().keyword() == "EPS":
            self.take()
            self.expect("(")
            variable, _ = self.name("causal variable")
            self.expect(")")
            self.expect("=")
            return DoAssign(variable, self.expr(), is_noise=True)
        variable, _ = self.name("causal variable")
        self.expect("=")
        return DoAssign(variable, self.expr(), is_noise=False)


# --- entry points -------------------------------------------------------------

def parse(text: str) -> QueryAst:
    """Parse and validate one query (a single trailing ';' is tolerated)."""
    ast = _Parser(tokenize(text)).query()
    validate_query(ast)
    return ast


def parse_script(text: str) -> list[QueryAst]:
    """Parse a ';'-separated sequence of queries."""
    tokens = tokenize(text)
    out: list[QueryAst] = []
    group: list[Token] = []
    for tok in tokens:
        if tok.kind in (";", "EOF"):
            if group:
                group.append(Token("EOF", "", None, tok.line, tok.col))
                ast = _Parser(group).query()
                validate_query(ast)
                out.append(ast)
                group = []
        else:
            group.append(tok)
    return out


# --- validation -----------------------------------------------------------------

def _chain_vars(chain: PatternChain) -> set[str]:
    out = set()
    if chain.name:
        out.add(chain.name)
    for el in chain.elements:
        if getattr(el, "var", None):
            out.add(el.var)
    return out


def _check_expr(expr, bound: set[str], in_projection_root: bool = False):
    if expr is None:
        return
    if isinstance(expr, (ProbabilityExpr, DoCalcExpr)) and not in_projection_root:
        raise MisplacedOperatorError(
            "PROBABILITY and DO_CALCULUS are only allowed as top-level RETURN or WITH projections")
    if isinstance(expr, FuncCall) and expr.name in ("count", "distinct") and not in_projection_root:
        raise MisplacedOperatorError(f"{expr.name}() is only allowed as a top-level projection")
    if isinstance(expr, VarRef):
        if expr.name not in bound:
            where = f" at line {expr.pos[0]}:{expr.pos[1]}" if expr.pos else ""
            raise UnboundVariableError(f"variable {expr.name!r} is not bound{where}")
        return
    if isinstance(expr, PropRef):
        if expr.var not in bound:
            where = f" at line {expr.pos[0]}:{expr.pos[1]}" if expr.pos else ""
            raise UnboundVariableError(f"variable {expr.var!r} is not bound{where}")
        return
    if isinstance(expr, ExistsExpr):
        inner = set(bound)
        for chain in expr.patterns:
            inner |= _chain_vars(chain)
        _check_expr(expr.where, inner)
        return
    if isinstance(expr, Unary):
        _check_expr(expr.operand, bound)
    elif isinstance(expr, Binary):
        _check_expr(expr.left, bound)
        _check_expr(expr.right, bound)
    elif isinstance(expr, FuncCall):
        _check_expr(expr.arg, bound)
    elif isinstance(expr, DoCalcExpr):
        # names inside DO_CALCULUS refer to causal variables, not row
        # bindings, so only nesting violations are checked here
        for child in walk_expr(expr):
            if child is expr:
                continue
            if isinstance(child, (ProbabilityExpr, DoCalcExpr)):
                raise MisplacedOperatorError(
                    "PROBABILITY and DO_CALCULUS cannot be nested inside DO_CALCULUS")
            if isinstance(child, FuncCall) and child.name in ("count", "distinct"):
                raise MisplacedOperatorError(
                    f"{child.name}() cannot appear inside DO_CALCULUS")


def _projection_name(item: Projection) -> str | None:
    if item.alias:
        return item.alias
    if isinstance(item.expr, VarRef):
        return item.expr.name
    return None


def validate_query(ast: QueryAst) -> None:
    if not ast.clauses:
        raise MisplacedClauseError("query has no clauses")
    for clause in ast.clauses[:-1]:
        if isinstance(clause, (ReturnClause, ExtractClause, MergeClause)):
            kind = type(clause).__name__.removesuffix("Clause").upper()
            raise MisplacedClauseError(f"{kind} must be the final clause")
    last = ast.clauses[-1]
    if not isinstance(last, (ReturnClause, ExtractClause, MergeClause)):
        raise MisplacedClauseError("query must end with RETURN, EXTRACT, or MERGE")
    if isinstance(ast.clauses[0], WithClause):
        raise MisplacedClauseError("WITH cannot open a query")
    if isinstance(last, (ExtractClause, MergeClause)):
        kind = type(last).__name__.removesuffix("Clause").upper()
        if not any(isinstance(c, MatchClause) for c in ast.clauses):
            raise MisplacedClauseError(f"{kind} needs at least one preceding MATCH")
        _check_extract_pattern(last.pattern)

    bound: set[str] = set()
    for clause in ast.clauses:
        if isinstance(clause, MatchClause):
            for chain in clause.patterns:
                bound |= _chain_vars(chain)
            _check_expr(clause.where, bound)
        elif isinstance(clause, (WithClause, ReturnClause)):
            for item in clause.items:
                _check_expr(item.expr, bound, in_projection_root=True)
            if isinstance(clause, WithClause):
                names = []
                for item in clause.items:
                    name = _projection_name(item)
                    if name is None:
                        raise MisplacedClauseError(
                            "WITH projections need an AS alias unless they are plain variables")
                    names.append(name)
                bound = set(names)
        elif isinstance(clause, (ExtractClause, MergeClause)):
            for el in clause.pattern.elements:
                if isinstance(el, NodePattern) and el.var not in bound:
                    raise UnboundVariableError(
                        f"variable {el.var!r} is not bound (EXTRACT anchors must "
                        "come from a MATCH)")


def _check_extract_pattern(pattern: PatternChain) -> None:
    for el in pattern.elements:
        if isinstance(el, NodePattern):
            if el.var is None:
                raise MisplacedClauseError(
                    "every node in an EXTRACT pattern needs an anchor variable")
            if el.label is None:
                raise MisplacedClauseError(
                    "every node in an EXTRACT pattern needs a causal-variable label")
            if el.props:
                raise MisplacedClauseError("EXTRACT pattern nodes cannot carry property maps")
        else:
            if el.star:
                raise MisplacedClauseError("EXTRACT patterns cannot use Kleene edges")
            if el.type is not None or el.var is not None:
                raise MisplacedClauseError("EXTRACT pattern edges must be plain arrows")


# --- printing -----------------------------------------------------------------

_PREC_ADD = 5
_PREC_MUL = 6


def _name_out(name: str) -> str:
    if _PLAIN_NAME.match(name) and name.upper() not in KEYWORDS:
        return name
    return f"`{name}`"


def _lit_out(value) -> str:
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return json.dumps(value)


def _category_out(label: str) -> str:
    try:
        float(label)
        return label
    except ValueError:
        pass
    if _PLAIN_NAME.match(label) and label.upper() not in KEYWORDS:
        return label
    return json.dumps(label)


def _expr_prec(expr) -> int:
    if isinstance(expr, Binary):
        return {"OR": 1, "AND": 2, "=": 4, "<>": 4, "<": 4, ">": 4, "<=": 4, ">=": 4,
                "+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL}[expr.op]
    if isinstance(expr, Unary):
        return 3 if expr.op == "NOT" else 7
    return 9


def _expr_out(expr, min_prec: int = 0) -> str:
    prec = _expr_prec(expr)
    if isinstance(expr, Lit):
        text = _lit_out(expr.value)
    elif isinstance(expr, VarRef):
        text = _name_out(expr.name)
    elif isinstance(expr, PropRef):
        text = f"{_name_out(expr.var)}.{_name_out(expr.key)}"
    elif isinstance(expr, Unary):
        if expr.op == "NOT":
            text = "NOT " + _expr_out(expr.operand, 3)
        else:
            text = "-" + _expr_out(expr.operand, 7)
    elif isinstance(expr, Binary):
        if expr.op in ("AND", "OR"):
            text = f"{_expr_out(expr.left, prec)} {expr.op} {_expr_out(expr.right, prec + 1)}"
        elif prec == 4:
            text = f"{_expr_out(expr.left, 5)} {expr.op} {_expr_out(expr.right, 5)}"
        else:
            text = f"{_expr_out(expr.left, prec)} {expr.op} {_expr_out(expr.right, prec + 1)}"
    elif isinstance(expr, FuncCall):
        text = f"{expr.name}({_expr_out(expr.arg)})"
    elif isinstance(expr, ExistsExpr):
        inner = ", ".join(_chain_out(c) for c in expr.patterns)
        if expr.where is not None:
            inner += " WHERE " + _expr_out(expr.where)
        text = "EXISTS { " + inner + " }"
    elif isinstance(expr, ProbabilityExpr):
        text = "PROBABILITY(" + _prob_term_out(expr.target)
        if expr.conditions:
            text += " | " + ", ".join(_prob_term_out(t) for t in expr.conditions)
        text += ")"
    elif isinstance(expr, DoCalcExpr):
        assigns = ", ".join(_assign_out(a) for a in expr.assignments)
        eqs = ", ".join(_expr_out(e) for e in expr.equations)
        text = f"DO_CALCULUS([{assigns}], [{eqs}])"
    else:
        raise TypeError(f"cannot print expression {expr!r}")
    if prec < min_prec:
        return f"({text})"
    return text


def _prob_term_out(term: ProbTerm) -> str:
    out = _name_out(term.variable)
    if term.value is not None:
        out += "=" + _category_out(term.value)
    return out


def _assign_out(assign: DoAssign) -> str:
    target = _name_out(assign.variable)
    if assign.is_noise:
        target = f"eps({target})"
    return f"{target}={_expr_out(assign.value)}"


def _node_out(node: NodePattern) -> str:
    out = "("
    if node.var:
        out += _name_out(node.var)
    if node.label:
        out += ":" + _name_out(node.label)
    if node.props:
        body = ", ".join(f"{_name_out(k)}: {_lit_out(v)}" for k, v in node.props)
        out += (" " if (node.var or node.label) else "") + "{" + body + "}"
    return out + ")"


def _edge_out(edge: EdgePattern) -> str:
    star = "*" if edge.star else ""
    if edge.var is None and edge.type is None:
        return ("-->" if edge.direction == "out" else "<--") + star
    inner = ""
    if edge.var:
        inner += _name_out(edge.var)
    if edge.type:
        inner += ":" + _name_out(edge.type)
    if edge.direction == "out":
        return f"-[{inner}]->{star}"
    return f"<-[{inner}]-{star}"


def _chain_out(chain: PatternChain) -> str:
    body = "".join(
        _node_out(el) if isinstance(el, NodePattern) else _edge_out(el)
        for el in chain.elements
    )
    if chain.name:
        return f"{_name_out(chain.name)}={body}"
    return body


def _projection_out(item: Projection) -> str:
    out = _expr_out(item.expr)
    if item.alias:
        out += " AS " + _name_out(item.alias)
    return out


def print_expr(expr) -> str:
    """Canonical text of one expression (used for default column names)."""
    return _expr_out(expr)


def pretty_print(ast: QueryAst) -> str:
    """Canonical single-line rendering; ``parse(pretty_print(q)) == q``."""
    parts = []
    for clause in ast.clauses:
        if isinstance(clause, MatchClause):
            head = "MATCH"
            if clause.mode.kind == "all":
                head += " ALL"
            elif clause.mode.kind == "shortest":
                head += f" SHORTEST {clause.mode.k}"
            body = ", ".join(_chain_out(c) for c in clause.patterns)
            text = f"{head} {body}"
            if clause.where is not None:
                text += " WHERE " + _expr_out(clause.where)
            parts.append(text)
        elif isinstance(clause, ExtractClause):
            parts.append("EXTRACT " + _chain_out(clause.pattern))
        elif isinstance(clause, MergeClause):
            parts.append("MERGE " + _chain_out(clause.pattern))
        elif isinstance(clause, WithClause):
            parts.append("WITH " + ", ".join(_projection_out(i) for i in clause.items))
        elif isinstance(clause, ReturnClause):
            parts.append("RETURN " + ", ".join(_projection_out(i) for i in clause.items))
        else:
            raise TypeError(f"cannot print clause {clause!r}")
    return " ".join(parts)
