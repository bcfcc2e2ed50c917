"""Tiny arithmetic-expression compiler for coefficient strings such as ``"1 + x*(1-x)"``.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('+' | '-') factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | VAR | 'pi' | FUNC '(' expr ')' | '(' expr ')'

``VAR`` is ``x`` by default (``t`` for temporal sources); ``FUNC`` is one of
sin, cos, exp, sqrt, abs.
"""

from __future__ import annotations

import re
from typing import Callable

import numpy as np

from fracsrc.errors import DomainError

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs}


def _tokenize(src: str) -> list[str]:
    out = []
    for m in _TOKEN.finditer(src):
        num, name, other = m.groups()
        if num is not None:
            out.append(num)
        elif name is not None:
            out.append(name)
        elif other is not None and not other.isspace():
            out.append(other)
    return out


class _Parser:
    def __init__(self, src: str, var: str = "x"):
        self.src = src
        self.var = var
        self.toks = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise DomainError(f"unexpected end of expression {self.src!r}")
        self.pos += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek() is not None:
            raise DomainError(f"unexpected token {self.peek()!r} in {self.src!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op, rhs = self.take(), self.term()
            node = (lambda l, r: lambda x: l(x) + r(x))(node, rhs) if op == "+" else \
                   (lambda l, r: lambda x: l(x) - r(x))(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek() in ("*", "/"):
            op, rhs = self.take(), self.factor()
            node = (lambda l, r: lambda x: l(x) * r(x))(node, rhs) if op == "*" else \
                   (lambda l, r: lambda x: l(x) / r(x))(node, rhs)
        return node

    def factor(self):
        if self.peek() == "-":
            self.take()
            inner = self.factor()
            return lambda x: -inner(x)
        if self.peek() == "+":
            self.take()
            return self.factor()
        base = self.atom()
        if self.peek() == "^":
            self.take()
            ex = self.factor()
            return lambda x: base(x) ** ex(x)
        return base

    def atom(self):
        tok = self.take()
        if tok == self.var:
            return lambda x: x
        if tok == "pi":
            return lambda x: np.full_like(x, np.pi, dtype=float)
        if tok in _FUNCS:
            fn = _FUNCS[tok]
            if self.take() != "(":
                raise DomainError(f"expected '(' after {tok} in {self.src!r}")
            arg = self.expr()
            if self.take() != ")":
                raise DomainError(f"missing ')' in {self.src!r}")
            return lambda x: fn(arg(x))
        if tok == "(":
            node = self.expr()
            if self.take() != ")":
                raise DomainError(f"missing ')' in {self.src!r}")
            return node
        try:
            val = float(tok)
        except ValueError:
            raise DomainError(f"unexpected token {tok!r} in {self.src!r}") from None
        return lambda x: np.full_like(x, val, dtype=float)


def compile_expression(src: str, var: str = "x") -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``src`` to a vectorized function of the variable ``var``."""
    fn = _Parser(src, var).parse()

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        # non-finite results are reported by the callers that sample coefficients
        with np.errstate(all="ignore"):
            return np.broadcast_to(fn(x), x.shape).astype(float)

    return wrapped
