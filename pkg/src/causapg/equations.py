"""Structural equations of the additive-noise form ``TARGET = f(parents) + eps``.

The expression grammar covers numbers, variable references (backtick-quoted
when the name is not a plain identifier), ``eps`` for the noise term, the four
arithmetic operators, unary minus, and parentheses. The noise symbol must
occur exactly once and as a top-level additive term; everything else about
``f`` is free-form arithmetic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import EquationSyntaxError, NoiseFormError, NonFiniteResultError, UncoveredSymbolError

_PLAIN_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def quote_name(name: str) -> str:
    """Render a variable name, backtick-quoted unless it is a plain identifier."""
    if _PLAIN_NAME.match(name) and name.lower() != "eps":
        return name
    return f"`{name}`"


# --- expression tree -------------------------------------------------------

@dataclass(frozen=True)
class ENum:
    value: float

    def __str__(self):
        return repr(self.value) if isinstance(self.value, float) else str(self.value)


@dataclass(frozen=True)
class EVar:
    name: str

    def __str__(self):
        return quote_name(self.name)


@dataclass(frozen=True)
class ENoise:
    def __str__(self):
        return "eps"


@dataclass(frozen=True)
class EBin:
    op: str  # + - * /
    left: object
    right: object

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class ENeg:
    operand: object

    def __str__(self):
        return f"(-{self.operand})"


def _walk(expr):
    yield expr
    if isinstance(expr, EBin):
        yield from _walk(expr.left)
        yield from _walk(expr.right)
    elif isinstance(expr, ENeg):
        yield from _walk(expr.operand)


def _eval(expr, env: dict, noise: float) -> float:
    if isinstance(expr, ENum):
        return float(expr.value)
    if isinstance(expr, EVar):
        try:
            return float(env[expr.name])
        except KeyError:
            raise UncoveredSymbolError(f"no value for symbol {expr.name!r}") from None
    if isinstance(expr, ENoise):
        return noise
    if isinstance(expr, ENeg):
        return -_eval(expr.operand, env, noise)
    if isinstance(expr, EBin):
        a = _eval(expr.left, env, noise)
        b = _eval(expr.right, env, noise)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if b == 0:
            raise NonFiniteResultError("division by zero in equation")
        return a / b
    raise TypeError(f"unknown expression node {expr!r}")


def _linear(expr):
    """Return (intercept, {var: coef}) for a linear expression, else None.

    The noise symbol contributes nothing here; callers only use this on the
    structural part, where noise is a plain additive term.
    """
    if isinstance(expr, ENum):
        return float(expr.value), {}
    if isinstance(expr, EVar):
        return 0.0, {expr.name: 1.0}
    if isinstance(expr, ENoise):
        return 0.0, {}
    if isinstance(expr, ENeg):
        inner = _linear(expr.operand)
        if inner is None:
            return None
        c, coefs = inner
        return -c, {k: -v for k, v in coefs.items()}
    if isinstance(expr, EBin):
        left = _linear(expr.left)
        right = _linear(expr.right)
        if left is None or right is None:
            return None
        (cl, fl), (cr, fr) = left, right
        if expr.op in "+-":
            sign = 1.0 if expr.op == "+" else -1.0
            coefs = dict(fl)
            for k, v in fr.items():
                coefs[k] = coefs.get(k, 0.0) + sign * v
            return cl + sign * cr, coefs
        if expr.op == "*":
            if not fl:  # constant * linear
                return cl * cr, {k: cl * v for k, v in fr.items()}
            if not fr:
                return cr * cl, {k: cr * v for k, v in fl.items()}
            return None
        # division: only by a nonzero constant
        if fr or cr == 0:
            return None
        return cl / cr, {k: v / cr for k, v in fl.items()}
    return None


# --- tokenizer / parser ----------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|`(?P<quoted>[^`]*)`"
    r"|(?P<op>[()+\-*/=]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise EquationSyntaxError(f"unexpected character {text[pos:].strip()[0]!r} in equation")
            break
        pos = m.end()
        if m.group("num") is not None:
            raw = m.group("num")
            value = int(raw) if re.fullmatch(r"\d+", raw) else float(raw)
            tokens.append(("num", value))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name")))
        elif m.group("quoted") is not None:
            tokens.append(("name", m.group("quoted")))
        else:
            tokens.append((m.group("op"), m.group("op")))
    tokens.append(("eof", None))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            raise EquationSyntaxError(f"expected {kind!r}, found {tok[1]!r}")
        self.pos += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[0] in "+-":
            op = self.take()[0]
            node = EBin(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] in "*/":
            op = self.take()[0]
            node = EBin(op, node, self.factor())
        return node

    def factor(self):
        kind, value = self.peek()
        if kind == "-":
            self.take()
            return ENeg(self.factor())
        if kind == "num":
            self.take()
            return ENum(value)
        if kind == "name":
            self.take()
            if value.lower() == "eps":
                return ENoise()
            return EVar(value)
        if kind == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        raise EquationSyntaxError(f"unexpected token {value!r} in equation")


@dataclass(frozen=True)
class StructuralEquation:
    """One additive-noise equation, kept with its source text."""

    target: str
    expr: object = field(compare=False)
    text: str
    parents: tuple[str, ...]
    residual_sigma: float | None = None

    def structural_value(self, env: dict) -> float:
        """Evaluate f(parents) with the noise term set to zero."""
        return _eval(self.expr, env, 0.0)

    def value(self, env: dict, noise: float) -> float:
        v = _eval(self.expr, env, noise)
        if not math.isfinite(v):
            raise NonFiniteResultError(f"equation for {self.target!r} produced a non-finite value")
        return v

    def linear_form(self):
        """(intercept, {parent: coefficient}) when f is linear, else None."""
        return _linear(self.expr)


def parse_equation(text: str) -> StructuralEquation:
    """Parse and validate ``TARGET = expr`` with exactly one additive noise term."""
    if "=" not in text:
        raise EquationSyntaxError("equation must have the form 'TARGET = expression'")
    tokens = _tokenize(text)
    p = _Parser(tokens)
    kind, target = p.take()
    if kind != "name":
        raise EquationSyntaxError("equation target must be a variable name")
    p.take("=")
    expr = p.expr()
    if p.peek()[0] != "eof":
        raise EquationSyntaxError(f"trailing tokens after equation: {p.peek()[1]!r}")

    occurrences = sum(1 for node in _walk(expr) if isinstance(node, ENoise))
    if occurrences == 0:
        raise NoiseFormError("equation has no noise term; expected '... + eps'")
    if occurrences > 1:
        raise NoiseFormError("noise term 'eps' must appear exactly once")
    if not _noise_is_top_level_additive(expr):
        raise NoiseFormError("noise must enter additively at the top level (f(parents) + eps)")

    parents = tuple(sorted({n.name for n in _walk(expr) if isinstance(n, EVar)}))
    if target in parents:
        raise EquationSyntaxError(f"equation target {target!r} cannot be its own parent")
    return StructuralEquation(target=target, expr=expr, text=text.strip(), parents=parents)


def _noise_is_top_level_additive(expr) -> bool:
    """True when the single noise occurrence is a positive top-level addend."""
    terms: list[tuple[object, int]] = []

    def flatten(e, sign):
        if isinstance(e, EBin) and e.op in "+-":
            flatten(e.left, sign)
            flatten(e.right, sign if e.op == "+" else -sign)
        else:
            terms.append((e, sign))

    flatten(expr, 1)
    for term, sign in terms:
        if isinstance(term, ENoise):
            return sign > 0
        if any(isinstance(n, ENoise) for n in _walk(term)):
            return False  # noise buried inside a product, quotient, or negation
    return False


def render_equation(target: str, intercept: float, coefficients: dict[str, float]) -> str:
    """Build canonical equation text from linear coefficients."""
    parts = [_num(intercept)]
    for name in coefficients:
        parts.append(f"{_num(coefficients[name])}*{quote_name(name)}")
    return f"{quote_name(target)} = " + " + ".join(parts) + " + eps"


def _num(x: float) -> str:
    value = float(x)
    if value == int(value) and abs(value) < 1e15:
        return repr(value)
    return repr(value)
