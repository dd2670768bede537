"""Small expression language for user-defined vector fields.

Grammar: numbers, variables x1..xn, named constants (pi, e), + - * / ^ with
unary minus, parentheses and a fixed set of functions. Expressions are parsed
to a tree and evaluated by walking it; Jacobians of parsed systems are always
finite differences.
"""

import math

import numpy as np

from .linalg import check_symmetric, AsymmetricMatrixError
from .systems import OdeSystem, fd_jacobian


def _arccot(x):
    # branch with range (0, pi): continuous and decreasing on all of R
    return math.pi / 2.0 - math.atan(x)


FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
    "atan": math.atan,
    "arccot": _arccot,
}

CONSTANTS = {"pi": math.pi, "e": math.e}


class ExpressionError(ValueError):
    """Parse or evaluation error carrying a line/column position."""

    def __init__(self, message, line, col):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")


class _Token:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind, value, line, col):
        self.kind = kind
        self.value = value
        self.line = line
        self.col = col


_OPERATORS = set("+-*/^()")
# unicode minus shows up in copy-pasted formulas; fold it into '-'
_MINUS_ALIASES = {"−", "–"}


def _tokenize(text):
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch in _MINUS_ALIASES:
            ch = "-"
        if ch in _OPERATORS:
            tokens.append(_Token("op", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < len(text) and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < len(text) and text[j] in "eE":
                k = j + 1
                if k < len(text) and (text[k] in "+-" or text[k] in _MINUS_ALIASES):
                    k += 1
                if k < len(text) and text[k].isdigit():
                    j = k
                    while j < len(text) and text[j].isdigit():
                        j += 1
            lit = text[i:j].replace("−", "-")
            try:
                value = float(lit)
            except ValueError:
                raise ExpressionError(f"malformed number {lit!r}", line, col) from None
            tokens.append(_Token("num", value, line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ExpressionError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("end", None, line, col))
    return tokens


class _Parser:
    """Recursive descent with standard precedence; ^ binds tightest, right-assoc."""

    def __init__(self, text, n_vars):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.n_vars = n_vars

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        tok = self.advance()
        if tok.kind != "op" or tok.value != op:
            raise ExpressionError(f"expected {op!r}", tok.line, tok.col)

    def parse(self):
        node = self.sum()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError("unexpected trailing input", tok.line, tok.col)
        return node

    def sum(self):
        node = self.term()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.value in "+-":
                self.advance()
                rhs = self.term()
                node = ("+" if tok.value == "+" else "-", node, rhs)
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.value in "*/":
                self.advance()
                rhs = self.unary()
                node = (tok.value, node, rhs)
            else:
                return node

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.value == "-":
            self.advance()
            return ("neg", self.unary())
        if tok.kind == "op" and tok.value == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.value == "^":
            self.advance()
            return ("^", base, self.unary())  # right-associative, allows 2^-3
        return base

    def atom(self):
        tok = self.advance()
        if tok.kind == "num":
            return ("num", tok.value)
        if tok.kind == "op" and tok.value == "(":
            node = self.sum()
            self.expect_op(")")
            return node
        if tok.kind == "name":
            name = tok.value
            if self.peek().kind == "op" and self.peek().value == "(":
                if name not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {name!r}", tok.line, tok.col)
                self.advance()
                arg = self.sum()
                self.expect_op(")")
                return ("call", name, arg)
            if name in CONSTANTS:
                return ("num", CONSTANTS[name])
            if name.startswith("x") and name[1:].isdigit():
                idx = int(name[1:])
                if 1 <= idx <= self.n_vars:
                    return ("var", idx - 1)
                raise ExpressionError(
                    f"variable {name!r} out of range (1..{self.n_vars})", tok.line, tok.col
                )
            raise ExpressionError(f"unknown identifier {name!r}", tok.line, tok.col)
        raise ExpressionError("expected a value", tok.line, tok.col)


def _evaluate(node, x):
    op = node[0]
    if op == "num":
        return node[1]
    if op == "var":
        return float(x[node[1]])
    if op == "neg":
        return -_evaluate(node[1], x)
    if op == "call":
        return FUNCTIONS[node[1]](_evaluate(node[2], x))
    a = _evaluate(node[1], x)
    b = _evaluate(node[2], x)
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


def parse_expression(text, n_vars):
    """Parse a single scalar expression over x1..xn; returns the tree."""
    return _Parser(text, n_vars).parse()


def parse_system(expressions, A, label="custom", analytic=False, probe_points=None):
    """Build an OdeSystem whose nonlinearity F is given by expressions.

    The full field is f(x) = -A x + F(x) with A supplied numerically; the
    Jacobian of F is by central finite differences.
    """
    n = len(expressions)
    try:
        A = check_symmetric(A)
    except AsymmetricMatrixError as exc:
        raise ExpressionError(f"matrix A is not symmetric: {exc}", 0, 0) from exc
    if A.shape != (n, n):
        raise ExpressionError(
            f"A must be {n}x{n} to match {n} expressions, got {A.shape}", 0, 0
        )
    trees = [parse_expression(text, n) for text in expressions]

    def F(x):
        return np.array([_evaluate(tree, x) for tree in trees])

    def jac_F(x):
        return fd_jacobian(F, x)

    if probe_points is None:
        probe_points = [np.full(n, 0.5), np.full(n, 1.5)]
    for p in probe_points:
        try:
            values = F(np.asarray(p, dtype=float))
        except (ArithmeticError, ValueError) as exc:
            raise ExpressionError(
                f"field evaluation failed at probe point {list(p)}: {exc}", 0, 0
            ) from exc
        if not np.all(np.isfinite(values)):
            raise ExpressionError(
                f"field evaluates to a non-finite value at probe point {list(p)}", 0, 0
            )

    return OdeSystem(n=n, A=A, F=F, jac_F=jac_F, analytic=analytic, label=label)
