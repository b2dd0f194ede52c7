"""Seeded random query ASTs for round-trip testing.

Builds only well-formed queries (bound variables, aggregates at projection
roots, extract patterns with labels and no props) so that parse and validate
accept everything generated. Printing an AST and parsing it back must give
an equal AST; printing again must give identical text.
"""

import random

from causapg.query.ast import (ALL, Binary, DoAssign, DoCalcExpr, EdgePattern,
                               ExistsExpr, ExtractClause, FuncCall, Lit,
                               MatchClause, MatchMode, MergeClause,
                               NodePattern, PatternChain, PLAIN,
                               ProbabilityExpr, ProbTerm, Projection, PropRef,
                               QueryAst, ReturnClause, Unary, VarRef,
                               WithClause)

PLAIN_NAMES = ["p", "h", "c1", "n2", "who", "stop", "q"]
FANCY_NAMES = ["HEART DISEASE", "LUNG-RELATED MORTALITY", "MATCH", "per cent"]
LABELS = ["Person", "Habit", "Condition", "SMOKING", "COPD", "Stop",
          "HEART DISEASE"]
PROP_KEYS = ["name", "freq", "severity", "age", "active"]
EDGE_TYPES = ["HAS_HABIT", "HAS_CONDITION", "NEXT", "BELONGS"]
CATEGORIES = ["present", "absent", "10", "2.5"]
VARIABLES = ["SMOKING", "COPD", "HEART DISEASE", "AGE"]


class QueryGen:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.counter = 0

    def fresh_var(self) -> str:
        self.counter += 1
        base = self.rng.choice(PLAIN_NAMES + FANCY_NAMES)
        return f"{base}{self.counter}" if base in PLAIN_NAMES else base

    def literal(self) -> Lit:
        r = self.rng.random()
        if r < 0.25:
            return Lit(self.rng.randint(-50, 500))
        if r < 0.45:
            return Lit(round(self.rng.uniform(0.001, 99.0), 3))
        if r < 0.7:
            return Lit(self.rng.choice(["Cigarettes", 'quote " inside',
                                        "line\nbreak", "plain"]))
        if r < 0.85:
            return Lit(self.rng.choice([True, False]))
        return Lit(None)

    def node(self, bound: list, force_var=False, force_label=False) -> NodePattern:
        var = None
        if force_var or self.rng.random() < 0.75:
            if bound and self.rng.random() < 0.25:
                var = self.rng.choice(bound)
            else:
                var = self.fresh_var()
                while var in bound:
                    var = self.fresh_var()
                bound.append(var)
        label = None
        if force_label or self.rng.random() < 0.7:
            label = self.rng.choice(LABELS)
        props = ()
        if self.rng.random() < 0.3:
            keys = self.rng.sample(PROP_KEYS, self.rng.randint(1, 2))
            props = tuple((k, self.literal().value) for k in keys)
        return NodePattern(var=var, label=label, props=props)

    def edge(self) -> EdgePattern:
        direction = self.rng.choice(["out", "in"])
        if self.rng.random() < 0.25:
            return EdgePattern(direction=direction, var=None, type=None,
                               star=True)
        etype = self.rng.choice(EDGE_TYPES + [None])
        var = None
        if etype is not None and self.rng.random() < 0.2:
            var = self.fresh_var()
        return EdgePattern(direction=direction, var=var, type=etype, star=False)

    def chain(self, bound: list, named=False) -> PatternChain:
        n = self.rng.randint(1, 3)
        elements = [self.node(bound)]
        for _ in range(n - 1):
            elements.append(self.edge())
            elements.append(self.node(bound))
        name = None
        if named or (n > 1 and self.rng.random() < 0.2):
            name = self.fresh_var()
            while name in bound:
                name = self.fresh_var()
            bound.append(name)
        return PatternChain(elements=tuple(elements), name=name)

    def comparison(self, bound: list) -> Binary:
        left = PropRef(self.rng.choice(bound), self.rng.choice(PROP_KEYS))
        op = self.rng.choice(["=", "<>", "<", "<=", ">", ">="])
        if self.rng.random() < 0.5:
            right = self.literal()
        else:
            right = PropRef(self.rng.choice(bound), self.rng.choice(PROP_KEYS))
        return Binary(op, left, right)

    def arithmetic(self, bound: list, depth=0):
        if depth >= 2 or self.rng.random() < 0.4:
            if self.rng.random() < 0.5:
                return PropRef(self.rng.choice(bound), self.rng.choice(PROP_KEYS))
            lit = self.literal()
            while not isinstance(lit.value, (int, float)) or isinstance(lit.value, bool):
                lit = self.literal()
            return lit
        op = self.rng.choice(["+", "-", "*", "/"])
        return Binary(op, self.arithmetic(bound, depth + 1),
                      self.arithmetic(bound, depth + 1))

    def predicate(self, bound: list, depth=0):
        r = self.rng.random()
        if depth >= 2 or r < 0.4:
            return self.comparison(bound)
        if r < 0.55:
            return Unary("NOT", self.predicate(bound, depth + 1))
        if r < 0.7 and depth == 0:
            local = list(bound)
            return ExistsExpr(patterns=(self.chain(local),),
                              where=self.comparison(local) if self.rng.random() < 0.4 else None)
        op = self.rng.choice(["AND", "OR"])
        return Binary(op, self.predicate(bound, depth + 1),
                      self.predicate(bound, depth + 1))

    def prob_expr(self) -> ProbabilityExpr:
        target = ProbTerm(self.rng.choice(VARIABLES),
                          self.rng.choice(CATEGORIES) if self.rng.random() < 0.7 else None)
        conds = tuple(ProbTerm(self.rng.choice(VARIABLES), self.rng.choice(CATEGORIES))
                      for _ in range(self.rng.randint(0, 2)))
        return ProbabilityExpr(target=target, conditions=conds)

    def do_expr(self) -> DoCalcExpr:
        assigns = []
        for _ in range(self.rng.randint(1, 2)):
            val = Lit(round(self.rng.uniform(-5, 5), 2))
            assigns.append(DoAssign(self.rng.choice(VARIABLES), val,
                                    is_noise=self.rng.random() < 0.3))
        outs = []
        for _ in range(self.rng.randint(1, 2)):
            v = VarRef(self.rng.choice(VARIABLES))
            if self.rng.random() < 0.3:
                outs.append(Binary("+", v, Lit(1)))
            else:
                outs.append(v)
        return DoCalcExpr(assignments=tuple(assigns), equations=tuple(outs))

    def projection(self, bound: list) -> Projection:
        r = self.rng.random()
        alias = None
        if r < 0.25:
            expr = VarRef(self.rng.choice(bound))
        elif r < 0.5:
            expr = PropRef(self.rng.choice(bound), self.rng.choice(PROP_KEYS))
        elif r < 0.62:
            inner = VarRef(self.rng.choice(bound))
            expr = FuncCall(self.rng.choice(["count", "distinct", "labels"]), inner)
        elif r < 0.72:
            expr = self.prob_expr()
        elif r < 0.8:
            expr = self.do_expr()
        else:
            expr = self.arithmetic(bound)
            alias = self.fresh_var()
        if alias is None and self.rng.random() < 0.3:
            alias = self.fresh_var()
        return Projection(expr=expr, alias=alias)

    def match_clause(self, bound: list) -> MatchClause:
        mode = PLAIN
        r = self.rng.random()
        if r < 0.12:
            mode = ALL
        elif r < 0.22:
            mode = MatchMode("shortest", self.rng.randint(1, 3))
        chains = tuple(self.chain(bound) for _ in range(self.rng.randint(1, 2)))
        where = self.predicate(bound) if (bound and self.rng.random() < 0.5) else None
        return MatchClause(patterns=chains, mode=mode, where=where)

    def extract_chain(self, bound: list) -> PatternChain:
        n = self.rng.randint(1, 2)
        elements = []
        for i in range(n):
            if i:
                elements.append(EdgePattern(direction=self.rng.choice(["out", "in"]),
                                            var=None, type=None, star=False))
            var = self.rng.choice(bound)
            label = self.rng.choice(VARIABLES)
            elements.append(NodePattern(var=var, label=label, props=()))
        return PatternChain(elements=tuple(elements), name=None)

    def query(self) -> QueryAst:
        bound: list = []
        clauses = [self.match_clause(bound)]
        while not any(
                isinstance(e, NodePattern) and e.var for c in clauses
                for ch in c.patterns for e in ch.elements):
            bound = []
            clauses = [self.match_clause(bound)]
        if self.rng.random() < 0.3:
            clauses.append(self.match_clause(bound))
        if self.rng.random() < 0.2:
            items = []
            keep = self.rng.sample(bound, min(len(bound), self.rng.randint(1, 3)))
            for v in keep:
                items.append(Projection(expr=VarRef(v), alias=None))
            extra = Projection(expr=self.arithmetic(bound), alias=self.fresh_var())
            clauses.append(WithClause(items=tuple(items + [extra])))
            bound = keep + [extra.alias]
        r = self.rng.random()
        if r < 0.75:
            n = self.rng.randint(1, 3)
            clauses.append(ReturnClause(items=tuple(
                self.projection(bound) for _ in range(n))))
        elif r < 0.9:
            clauses.append(ExtractClause(pattern=self.extract_chain(bound)))
        else:
            clauses.append(MergeClause(pattern=self.extract_chain(bound)))
        return QueryAst(clauses=tuple(clauses))


def generate(seed: int, count: int):
    gen = QueryGen(seed)
    return [gen.query() for _ in range(count)]
