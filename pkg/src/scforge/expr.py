"""Closed-form expressions in the coordinates u and v.

Seed data in a config file is written as small formulas such as
``"exp(3*u + v/3)"``.  This module parses them into an immutable syntax tree
and evaluates that tree on second-order jets, which gives values and exact
first and second partial derivatives.  The jets are the differentiation
oracle that the finite-difference machinery is checked against.

Grammar (lowest to highest precedence)::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | NAME | NAME '(' sum ')' | '(' sum ')'

``^`` is right-associative and binds tighter than unary minus, so ``-u^2``
means ``-(u^2)``.  Juxtaposition is not multiplication: ``2u`` is an error.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from . import jet as J
from .errors import DomainError, ExprSyntaxError, UnknownIdentifier

VARIABLES = ("u", "v")
CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {
    "sin": J.sin,
    "cos": J.cos,
    "exp": J.exp,
    "log": J.log,
    "sqrt": J.sqrt,
}


class Expr:
    """Base class of syntax-tree nodes."""

    def is_constant(self):
        return not self.variables()

    def variables(self):
        raise NotImplementedError

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def variables(self):
        return frozenset()


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def variables(self):
        return frozenset([self.name]) if self.name in VARIABLES else frozenset()


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def variables(self):
        return self.arg.variables()


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr

    def variables(self):
        return self.arg.variables()


# -- tokenizer -------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad, source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, tok[2], self.source)

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text or tok[0] != "op":
            self.fail(f"expected {text!r}")
        self.take()

    def parse(self):
        node = self.sum()
        tok = self.peek()
        if tok[0] != "end":
            self.fail(f"unexpected {tok[1]!r} (implicit multiplication is not supported)"
                      if tok[0] in ("name", "num") or tok[1] == "(" else f"unexpected {tok[1]!r}")
        return node

    def sum(self):
        node = self.product()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.product())
        return node

    def product(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            arg = self.unary()
            return Neg(arg) if tok[1] == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, text, pos = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.sum()
                self.expect(")")
                return Call(text, arg)
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                raise UnknownIdentifier(text, pos)
            if text in VARIABLES or text in CONSTANTS:
                return Var(text)
            raise UnknownIdentifier(text, pos)
        if kind == "op" and text == "(":
            node = self.sum()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of expression", tok)
        self.fail(f"unexpected {text!r}", tok)


def parse(source):
    """Parse ``source`` into an :class:`Expr` tree."""
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source if isinstance(source, str) else "")
    return _Parser(source).parse()


def to_string(e):
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# -- evaluation ------------------------------------------------------------

def _constant_value(e):
    return float(_eval(e, J.Jet.coordinate_u(0.0), J.Jet.coordinate_v(0.0)).val)


def _eval(e, ju, jv):
    if isinstance(e, Num):
        return J.Jet.constant(np.full(np.shape(ju.val), e.value))
    if isinstance(e, Var):
        if e.name == "u":
            return ju
        if e.name == "v":
            return jv
        return J.Jet.constant(np.full(np.shape(ju.val), CONSTANTS[e.name]))
    if isinstance(e, Neg):
        return -_eval(e.arg, ju, jv)
    if isinstance(e, Call):
        return FUNCTIONS[e.func](_eval(e.arg, ju, jv))
    if isinstance(e, BinOp):
        a = _eval(e.left, ju, jv)
        if e.op == "^" and e.right.is_constant():
            return J.power(a, _constant_value(e.right))
        b = _eval(e.right, ju, jv)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return a / b
        if e.op == "^":
            return J.exp(b * J.log(a))
    raise TypeError(f"not an expression node: {e!r}")


def eval_jet(e, u, v):
    """Value and partial derivatives up to second order of ``e`` at (u, v).

    ``u`` and ``v`` may be scalars or broadcast-compatible arrays.  Raises
    :class:`DomainError` if any point is outside the expression's domain.
    """
    if isinstance(e, str):
        e = parse(e)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    with np.errstate(all="ignore"):
        out = _eval(e, J.Jet.coordinate_u(u), J.Jet.coordinate_v(v))
    for part in out.parts():
        if not np.all(np.isfinite(part)):
            raise DomainError(f"non-finite result evaluating {to_string(e)}")
    return out


def evaluate(e, u, v):
    """Value of ``e`` at (u, v) without derivatives."""
    return eval_jet(e, u, v).val
