"""Closed-form scalar expressions over (x, y, t).

Scenario data (loads, initial and boundary values) is written as small
arithmetic expressions in the config file.  The grammar is deliberately
tiny: literals, the variables x, y, t, the constants pi and e, the
operators + - * / ^ with the usual precedence (^ binds tightest and is
right-associative), unary minus, parentheses, and the functions sin,
cos, exp.  Expressions compile once to an AST and evaluate vectorized
over numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTANTS = {"pi": math.pi, "e": math.e}
_VARIABLES = ("x", "y", "t")


class ExpressionError(ValueError):
    """Syntax or name error in a scenario expression, with position."""

    def __init__(self, message, source, pos):
        super().__init__(f"{message} (column {pos + 1} of {source!r})")
        self.source = source
        self.pos = pos


def _tokenize(source):
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*/^()":
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            seen_exp = False
            while j < n and (source[j].isdigit() or source[j] == "."
                             or source[j] in "eE"
                             or (seen_exp and source[j] in "+-")):
                if source[j] in "eE":
                    # only an exponent when followed by digit or sign
                    if j + 1 < n and (source[j + 1].isdigit()
                                      or source[j + 1] in "+-"):
                        seen_exp = True
                    else:
                        break
                elif source[j] in "+-":
                    if not (seen_exp and source[j - 1] in "eE"):
                        break
                j += 1
            text = source[i:j]
            try:
                value = float(text)
            except ValueError:
                raise ExpressionError(f"bad number {text!r}", source, i)
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
            continue
        raise ExpressionError(f"unexpected character {c!r}", source, i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    """Recursive descent over the token list; builds nested tuples."""

    def __init__(self, source, tokens):
        self.source = source
        self.tokens = tokens
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind):
        tok = self.take()
        if tok[0] != kind:
            raise ExpressionError(f"expected {kind!r}", self.source, tok[2])
        return tok

    def parse(self):
        node = self.sum_()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError("trailing input", self.source, tok[2])
        return node

    def sum_(self):
        node = self.term()
        while self.peek()[0] in "+-":
            op = self.take()[0]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] in "*/":
            op = self.take()[0]
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "-":
            self.take()
            return ("neg", self.unary())
        if self.peek()[0] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            # right-associative; exponent may carry a unary sign
            return ("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, value, pos = tok
        if kind == "num":
            return ("num", value)
        if kind == "(":
            node = self.sum_()
            self.expect(")")
            return node
        if kind == "name":
            if value in _FUNCTIONS:
                self.expect("(")
                arg = self.sum_()
                self.expect(")")
                return ("call", value, arg)
            if value in _CONSTANTS:
                return ("num", _CONSTANTS[value])
            if value in _VARIABLES:
                return ("var", value)
            raise ExpressionError(f"unknown name {value!r}", self.source, pos)
        raise ExpressionError("expected value", self.source, pos)


def _evaluate(node, env):
    op = node[0]
    if op == "num":
        return node[1]
    if op == "var":
        return env[node[1]]
    if op == "neg":
        return -_evaluate(node[1], env)
    if op == "call":
        return _FUNCTIONS[node[1]](_evaluate(node[2], env))
    a = _evaluate(node[1], env)
    b = _evaluate(node[2], env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if op == "^":
        return a ** b
    raise AssertionError(f"unhandled node {op!r}")


class Expression:
    """A compiled expression.  Callable as expr(x=..., y=..., t=...).

    Missing variables default to 0.0 so purely spatial data can be
    evaluated without a time argument and vice versa.  Arguments may be
    scalars or numpy arrays (broadcast together).
    """

    def __init__(self, source):
        self.source = source.strip()
        if not self.source:
            raise ExpressionError("empty expression", source, 0)
        self._ast = _Parser(self.source, _tokenize(self.source)).parse()

    def __call__(self, x=0.0, y=0.0, t=0.0):
        env = {"x": np.asarray(x, dtype=float),
               "y": np.asarray(y, dtype=float),
               "t": np.asarray(t, dtype=float)}
        out = _evaluate(self._ast, env)
        return np.asarray(out, dtype=float)

    def __repr__(self):
        return f"Expression({self.source!r})"

    def is_zero(self):
        """True when the source is syntactically the constant 0."""
        node = self._ast
        while node[0] == "neg":
            node = node[1]
        return node[0] == "num" and node[1] == 0.0


def parse_expression(source):
    """Compile ``source`` into an Expression; raises ExpressionError."""
    return Expression(source)
