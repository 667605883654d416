"""Closed-form scalar expressions over chart coordinates x0..x9.

Grammar (recursive descent, standard precedence, ``^`` binds tightest and
is right-associative)::

    expr     := term (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*
    factor   := '-' factor | power
    power    := atom ('^' exponent)?
    exponent := ['-'] INT | '(' ['-'] INT '/' INT ')'
    atom     := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'
    VAR      := 'x0' .. 'x9'
    FUNC     := 'exp' | 'log' | 'sin' | 'cos' | 'sinh' | 'cosh' | 'sqrt'
    NUMBER   := digits ['.' digits] [('e'|'E') ['+'|'-'] digits]

Exponents are restricted to integer or rational literals; there is no
implicit multiplication.  Parse errors carry the offending position.
Expressions evaluate either to floats (vectorised over numpy arrays) or to
jets at a base point.
"""

from __future__ import annotations

import re
from fractions import Fraction

import numpy as np

from .jet import Jet, jcos, jcosh, jexp, jlog, jsin, jsinh, jsqrt
from .space import get_space

_FUNCS = {
    "exp": (np.exp, jexp),
    "log": (np.log, jlog),
    "sin": (np.sin, jsin),
    "cos": (np.cos, jcos),
    "sinh": (np.sinh, jsinh),
    "cosh": (np.cosh, jcosh),
    "sqrt": (np.sqrt, jsqrt),
}


class ExprError(ValueError):
    def __init__(self, message, pos=None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at position {pos})"
        super().__init__(message)


# -- AST ----------------------------------------------------------------


class Expr:
    """Base class; nodes implement eval / jet / children and printing."""

    def eval(self, x):
        raise NotImplementedError

    def jet(self, point, order):
        raise NotImplementedError

    def __add__(self, other):
        return Add(self, _as_expr(other))

    def __radd__(self, other):
        return Add(_as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, _as_expr(other))

    def __rsub__(self, other):
        return Sub(_as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, _as_expr(other))

    def __rmul__(self, other):
        return Mul(_as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, _as_expr(other))

    def __neg__(self):
        return Neg(self)

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash((type(self).__name__, self._key()))

    def __repr__(self):
        return f"parse({to_string(self)!r})"


def _as_expr(v):
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, Fraction)):
        return Const(float(v))
    raise TypeError(f"cannot coerce {v!r} to an expression")


class Const(Expr):
    def __init__(self, value):
        self.value = float(value)

    def _key(self):
        return self.value

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim <= 1:
            return self.value
        return np.full(x.shape[:-1], self.value)

    def jet(self, point, order):
        n = len(point)
        return Jet.constant(self.value, get_space(n, order), point)


class Var(Expr):
    def __init__(self, k):
        self.k = int(k)

    def _key(self):
        return self.k

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x[..., self.k]

    def jet(self, point, order):
        n = len(point)
        if self.k >= n:
            raise ExprError(f"x{self.k} out of range for dimension {n}")
        return Jet.variable(self.k, get_space(n, order), point)


class _Binary(Expr):
    def __init__(self, a, b):
        self.a = a
        self.b = b

    def _key(self):
        return (self.a, self.b)


class Add(_Binary):
    def eval(self, x):
        return self.a.eval(x) + self.b.eval(x)

    def jet(self, point, order):
        return self.a.jet(point, order) + self.b.jet(point, order)


class Sub(_Binary):
    def eval(self, x):
        return self.a.eval(x) - self.b.eval(x)

    def jet(self, point, order):
        return self.a.jet(point, order) - self.b.jet(point, order)


class Mul(_Binary):
    def eval(self, x):
        return self.a.eval(x) * self.b.eval(x)

    def jet(self, point, order):
        return self.a.jet(point, order) * self.b.jet(point, order)


class Div(_Binary):
    def eval(self, x):
        return self.a.eval(x) / self.b.eval(x)

    def jet(self, point, order):
        return self.a.jet(point, order) / self.b.jet(point, order)


class Neg(Expr):
    def __init__(self, a):
        self.a = a

    def _key(self):
        return (self.a,)

    def eval(self, x):
        return -self.a.eval(x)

    def jet(self, point, order):
        return -self.a.jet(point, order)


class Pow(Expr):
    def __init__(self, base, expo: Fraction):
        self.base = base
        self.expo = Fraction(expo)

    def _key(self):
        return (self.base, self.expo)

    def eval(self, x):
        e = self.expo
        return self.base.eval(x) ** (int(e) if e.denominator == 1 else float(e))

    def jet(self, point, order):
        return self.base.jet(point, order) ** self.expo


class Call(Expr):
    def __init__(self, name, arg):
        if name not in _FUNCS:
            raise ExprError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg

    def _key(self):
        return (self.name, self.arg)

    def eval(self, x):
        return _FUNCS[self.name][0](self.arg.eval(x))

    def jet(self, point, order):
        return _FUNCS[self.name][1](self.arg.jet(point, order))


# -- printing -----------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4, Const: 5, Var: 5, Call: 5}


def to_string(e: Expr) -> str:
    """Render with minimal parentheses; reparsing yields an equal tree."""

    def wrap(child, parent_prec, right=False):
        s = to_string(child)
        prec = _PREC[type(child)]
        if prec < parent_prec or (right and prec == parent_prec):
            return f"({s})"
        return s

    if isinstance(e, Const):
        v = e.value
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    if isinstance(e, Var):
        return f"x{e.k}"
    if isinstance(e, Add):
        return f"{wrap(e.a, 1)} + {wrap(e.b, 1, right=True)}"
    if isinstance(e, Sub):
        return f"{wrap(e.a, 1)} - {wrap(e.b, 1, right=True)}"
    if isinstance(e, Mul):
        return f"{wrap(e.a, 2)}*{wrap(e.b, 2, right=True)}"
    if isinstance(e, Div):
        return f"{wrap(e.a, 2)}/{wrap(e.b, 2, right=True)}"
    if isinstance(e, Neg):
        return f"-{wrap(e.a, 3)}"
    if isinstance(e, Pow):
        q = e.expo
        es = str(q.numerator) if q.denominator == 1 else f"({q.numerator}/{q.denominator})"
        return f"{wrap(e.base, 5)}^{es}"
    if isinstance(e, Call):
        return f"{e.name}({to_string(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# -- parser -------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                stripped = text[pos:].lstrip()
                if not stripped:
                    break
                raise ExprError(f"unexpected character {stripped[0]!r}", pos)
            pos = m.end()
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind), m.start(kind)))
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ExprError(f"expected {op!r}, found {val or 'end of input'!r}", pos)

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise ExprError(f"trailing input {val!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                e = Add(e, rhs) if val == "+" else Sub(e, rhs)
            else:
                return e

    def term(self):
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.factor()
                e = Mul(e, rhs) if val == "*" else Div(e, rhs)
            else:
                return e

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return Pow(base, self.exponent())
        return base

    def exponent(self):
        kind, val, pos = self.peek()
        neg = False
        if kind == "op" and val == "-":
            self.next()
            neg = True
            kind, val, pos = self.peek()
        if kind == "num":
            self.next()
            if "." in val or "e" in val or "E" in val:
                raise ExprError("exponent must be an integer or (p/q) rational", pos)
            q = Fraction(int(val))
            return -q if neg else q
        if kind == "op" and val == "(" and not neg:
            self.next()
            sign = 1
            kind, val, pos = self.peek()
            if kind == "op" and val == "-":
                self.next()
                sign = -1
            kind, val, pos = self.next()
            if kind != "num" or "." in val:
                raise ExprError("exponent must be an integer or (p/q) rational", pos)
            p = sign * int(val)
            self.expect_op("/")
            kind, val, pos = self.next()
            if kind != "num" or "." in val:
                raise ExprError("exponent denominator must be an integer", pos)
            q = Fraction(p, int(val))
            self.expect_op(")")
            return q
        raise ExprError("exponent must be an integer or (p/q) rational", pos)

    def atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            m = re.fullmatch(r"x(\d)", val)
            if m:
                return Var(int(m.group(1)))
            if val in _FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            raise ExprError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprError(f"expected a value, found {val or 'end of input'!r}", pos)


def parse(text: str) -> Expr:
    return _Parser(text).parse()


def jet_eval(e, point, order: int) -> Jet:
    """Evaluate an expression (or source string) as a jet at ``point``."""
    if isinstance(e, str):
        e = parse(e)
    return e.jet(np.asarray(point, dtype=np.float64), order)
