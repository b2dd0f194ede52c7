"""Query language: lexer, parser, printer and the evaluation engine."""

from .engine import QueryResult, evaluate, render_value
from .parser import parse, parse_script, pretty_print, print_expr, tokenize

__all__ = ["QueryResult", "evaluate", "parse", "parse_script",
           "pretty_print", "print_expr", "render_value", "tokenize"]
