"""Tiny deterministic expression language for coefficients in run configurations.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | atom
    atom   := NUMBER | 'pi' | 'x1' .. 'xd' | 't'
            | ('sin' | 'cos' | 'exp') '(' expr ')' | '(' expr ')'

Expressions compile to numpy closures; no ``eval`` is involved.
"""
from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_ALIASES = {"−": "-", "×": "*", "÷": "/"}


class ExpressionError(ValueError):
    pass


def _tokenize(text):
    for a, b in _ALIASES.items():
        text = text.replace(a, b)
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExpressionError(f"cannot read {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif name is not None:
            out.append(("name", name))
        elif op in "+-*/()":
            out.append(("op", op))
        else:
            raise ExpressionError(f"unexpected character {op!r} at position {m.start(3)}")
        pos = m.end()
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, text, dim, allow_t):
        self.toks = _tokenize(text)
        self.i = 0
        self.dim = dim
        self.allow_t = allow_t
        self.text = text

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            raise ExpressionError(f"in {self.text!r}: expected {value or kind}, found {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        self.take("end")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = (lambda a, b: lambda x, t: a(x, t) + b(x, t))(node, rhs) if op == "+" else \
                (lambda a, b: lambda x, t: a(x, t) - b(x, t))(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            node = (lambda a, b: lambda x, t: a(x, t) * b(x, t))(node, rhs) if op == "*" else \
                (lambda a, b: lambda x, t: a(x, t) / b(x, t))(node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda x, t: -inner(x, t)
        if self.peek() == ("op", "+"):
            self.take()
        return self.atom()

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return lambda x, t, c=val: c
        if kind == "op" and val == "(":
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        if kind == "name":
            self.take()
            if val == "pi":
                return lambda x, t: np.pi
            if val == "t":
                if not self.allow_t:
                    raise ExpressionError(f"in {self.text!r}: 't' is not allowed in a spatial field")
                return lambda x, t: t
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                j = int(m.group(1))
                if not 1 <= j <= self.dim:
                    raise ExpressionError(f"in {self.text!r}: {val} exceeds dimension {self.dim}")
                return lambda x, t, j=j - 1: x[j]
            if val in _FUNCS:
                fn = _FUNCS[val]
                self.take("op", "(")
                arg = self.expr()
                self.take("op", ")")
                return lambda x, t: fn(arg(x, t))
            raise ExpressionError(f"in {self.text!r}: unknown name {val!r}")
        raise ExpressionError(f"in {self.text!r}: unexpected token {val!r}")


def compile_field(source, dim, spatial=False):
    """Compile a number or expression string to a vectorized callable.

    Space-time fields are called as ``fn(x, t)``, spatial ones as ``fn(x)``;
    ``x`` is a sequence of coordinate arrays.
    """
    if isinstance(source, (int, float)):
        value = float(source)
        node = lambda x, t: value  # noqa: E731
    elif isinstance(source, str):
        node = _Parser(source, dim, allow_t=not spatial).parse()
    else:
        raise ExpressionError(f"expected a number or expression string, got {type(source).__name__}")

    def broadcast(x, t):
        return np.asarray(node(x, t), dtype=float) * np.ones(np.shape(x[0]))

    if spatial:
        return lambda x: broadcast(x, 0.0)
    return broadcast
