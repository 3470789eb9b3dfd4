"""Arithmetic expression engine with exact symbolic differentiation.

Parses the small language used throughout the toolkit (operators ``+ - * / ^``,
functions ``exp log sin cos tan sqrt sinh cosh tanh atan asin acos``, constants
``pi`` and ``e``) into an AST that can be

* evaluated at a point (real or complex arguments, numpy broadcasting works),
* differentiated symbolically with respect to a named variable,
* substituted (composition of expressions, used for pullbacks),
* compiled into a fast vectorised python callable.

Fields built from expressions therefore carry machine-precision partial
derivatives of any order; everything else in the package falls back to central
differences.
"""

from __future__ import annotations

import math
import re

import numpy as np

__all__ = ["Expr", "Num", "Var", "parse", "ParseError"]


class ParseError(ValueError):
    """Raised when an expression string cannot be parsed."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class Expr:
    """Base class for expression nodes."""

    def eval(self, env):
        raise NotImplementedError

    def diff(self, name):
        raise NotImplementedError

    def subs(self, mapping):
        """Replace variables by expressions; mapping is {name: Expr}."""
        raise NotImplementedError

    def variables(self):
        out = set()
        self._collect(out)
        return out

    def _collect(self, out):
        pass

    def to_python(self):
        raise NotImplementedError

    def __repr__(self):
        return f"<expr {self}>"

    # convenience operators so internal code can build trees naturally
    def __add__(self, other):
        return add(self, _as_expr(other))

    def __radd__(self, other):
        return add(_as_expr(other), self)

    def __sub__(self, other):
        return sub(self, _as_expr(other))

    def __rsub__(self, other):
        return sub(_as_expr(other), self)

    def __mul__(self, other):
        return mul(self, _as_expr(other))

    def __rmul__(self, other):
        return mul(_as_expr(other), self)

    def __truediv__(self, other):
        return div(self, _as_expr(other))

    def __rtruediv__(self, other):
        return div(_as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, other):
        return pow_(self, _as_expr(other))


class Num(Expr):
    def __init__(self, value):
        self.value = float(value) if not isinstance(value, complex) else value

    def eval(self, env):
        return self.value

    def diff(self, name):
        return Num(0.0)

    def subs(self, mapping):
        return self

    def to_python(self):
        return repr(self.value)

    def __str__(self):
        return repr(self.value)


class Var(Expr):
    def __init__(self, name):
        self.name = name

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise ParseError(f"unbound variable {self.name!r}") from None

    def diff(self, name):
        return Num(1.0) if name == self.name else Num(0.0)

    def subs(self, mapping):
        return mapping.get(self.name, self)

    def _collect(self, out):
        out.add(self.name)

    def to_python(self):
        return f"_v[{self.name!r}]"

    def __str__(self):
        return self.name


class Bin(Expr):
    op = "?"

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def subs(self, mapping):
        return type(self).make(self.a.subs(mapping), self.b.subs(mapping))

    def _collect(self, out):
        self.a._collect(out)
        self.b._collect(out)

    def to_python(self):
        return f"({self.a.to_python()} {self.op} {self.b.to_python()})"

    def __str__(self):
        return f"({self.a} {self.op} {self.b})"


class Add(Bin):
    op = "+"
    make = staticmethod(lambda a, b: add(a, b))

    def eval(self, env):
        return self.a.eval(env) + self.b.eval(env)

    def diff(self, name):
        return add(self.a.diff(name), self.b.diff(name))


class Sub(Bin):
    op = "-"
    make = staticmethod(lambda a, b: sub(a, b))

    def eval(self, env):
        return self.a.eval(env) - self.b.eval(env)

    def diff(self, name):
        return sub(self.a.diff(name), self.b.diff(name))


class Mul(Bin):
    op = "*"
    make = staticmethod(lambda a, b: mul(a, b))

    def eval(self, env):
        return self.a.eval(env) * self.b.eval(env)

    def diff(self, name):
        return add(mul(self.a.diff(name), self.b), mul(self.a, self.b.diff(name)))


class Div(Bin):
    op = "/"
    make = staticmethod(lambda a, b: div(a, b))

    def eval(self, env):
        return self.a.eval(env) / self.b.eval(env)

    def diff(self, name):
        # (a/b)' = a'/b - a b'/b^2
        return sub(div(self.a.diff(name), self.b),
                   div(mul(self.a, self.b.diff(name)), mul(self.b, self.b)))


class Pow(Bin):
    op = "**"
    make = staticmethod(lambda a, b: pow_(a, b))

    def eval(self, env):
        return self.a.eval(env) ** self.b.eval(env)

    def diff(self, name):
        a, b = self.a, self.b
        da, db = a.diff(name), b.diff(name)
        if isinstance(db, Num) and db.value == 0.0:
            # constant exponent: b * a^(b-1) * a'
            return mul(mul(b, pow_(a, sub(b, Num(1.0)))), da)
        # general case: a^b (b' ln a + b a'/a)
        return mul(self, add(mul(db, Call("log", a)), div(mul(b, da), a)))

    def __str__(self):
        return f"({self.a} ^ {self.b})"


class Neg(Expr):
    def __init__(self, a):
        self.a = a

    def eval(self, env):
        return -self.a.eval(env)

    def diff(self, name):
        return neg(self.a.diff(name))

    def subs(self, mapping):
        return neg(self.a.subs(mapping))

    def _collect(self, out):
        self.a._collect(out)

    def to_python(self):
        return f"(-{self.a.to_python()})"

    def __str__(self):
        return f"(-{self.a})"


_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "atan": np.arctan,
    "asin": np.arcsin,
    "acos": np.arccos,
}


class Call(Expr):
    def __init__(self, fname, a):
        if fname not in _FUNCS:
            raise ParseError(f"unknown function {fname!r}")
        self.fname = fname
        self.a = a

    def eval(self, env):
        return _FUNCS[self.fname](self.a.eval(env))

    def diff(self, name):
        a = self.a
        da = a.diff(name)
        f = self.fname
        if f == "exp":
            return mul(self, da)
        if f == "log":
            outer = div(Num(1.0), a)
        elif f == "sin":
            outer = Call("cos", a)
        elif f == "cos":
            outer = neg(Call("sin", a))
        elif f == "tan":
            outer = add(Num(1.0), mul(self, self))
        elif f == "sqrt":
            outer = div(Num(0.5), self)
        elif f == "sinh":
            outer = Call("cosh", a)
        elif f == "cosh":
            outer = Call("sinh", a)
        elif f == "tanh":
            outer = sub(Num(1.0), mul(self, self))
        elif f == "atan":
            outer = div(Num(1.0), add(Num(1.0), mul(a, a)))
        elif f == "asin":
            outer = div(Num(1.0), Call("sqrt", sub(Num(1.0), mul(a, a))))
        elif f == "acos":
            outer = neg(div(Num(1.0), Call("sqrt", sub(Num(1.0), mul(a, a)))))
        else:  # pragma: no cover
            raise ParseError(f"no derivative rule for {f}")
        return mul(outer, da)

    def subs(self, mapping):
        return Call(self.fname, self.a.subs(mapping))

    def _collect(self, out):
        self.a._collect(out)

    def to_python(self):
        return f"_f[{self.fname!r}]({self.a.to_python()})"

    def __str__(self):
        return f"{self.fname}({self.a})"


# ---------------------------------------------------------------------------
# simplifying constructors (keep derivative trees small)
# ---------------------------------------------------------------------------

def _as_expr(x):
    if isinstance(x, Expr):
        return x
    return Num(x)


def _is_num(e, v=None):
    return isinstance(e, Num) and (v is None or e.value == v)


def add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return Add(a, b)


def sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    if _is_num(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return Mul(a, b)


def div(a, b):
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value / b.value)
    return Div(a, b)


def neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def pow_(a, b):
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    if _is_num(a) and _is_num(b):
        return Num(a.value ** b.value)
    return Pow(a, b)


# ---------------------------------------------------------------------------
# parser: tokeniser + recursive descent, '^' right-associative
# ---------------------------------------------------------------------------

_CONSTANTS = {"pi": math.pi, "e": math.e}


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>\*\*|[+\-*/^(),])"
    r")"
)


def _tokenize(s):
    tokens = []
    pos = 0
    while pos < len(s):
        m = _TOKEN_RE.match(s, pos)
        if not m or m.end() == pos:
            if s[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {s[pos]!r} at position {pos} in {s!r}")
        pos = m.end()
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            op = m.group("op")
            tokens.append(("op", "^" if op == "**" else op))
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, tokens, source):
        self.toks = tokens
        self.pos = 0
        self.source = source

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, value):
        kind, val = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, got {val!r} in {self.source!r}")

    def parse_expr(self):
        node = self.parse_term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.next()
            rhs = self.parse_term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.next()
            rhs = self.parse_unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def parse_unary(self):
        if self.peek() == ("op", "-"):
            self.next()
            return neg(self.parse_unary())
        if self.peek() == ("op", "+"):
            self.next()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.peek() == ("op", "^"):
            self.next()
            # right associative; exponent may carry a unary minus
            exponent = self.parse_unary()
            return pow_(base, exponent)
        return base

    def parse_atom(self):
        kind, val = self.next()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek() == ("op", "("):
                self.next()
                arg = self.parse_expr()
                self.expect(")")
                return Call(val, arg)
            if val in _CONSTANTS:
                return Num(_CONSTANTS[val])
            return Var(val)
        if (kind, val) == ("op", "("):
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token {val!r} in {self.source!r}")


def parse(source):
    """Parse an expression string into an :class:`Expr`."""
    if isinstance(source, Expr):
        return source
    if isinstance(source, (int, float)):
        return Num(source)
    p = _Parser(_tokenize(source), source)
    node = p.parse_expr()
    if p.peek()[0] != "end":
        raise ParseError(f"trailing input at token {p.peek()[1]!r} in {source!r}")
    return node


def compile_expr(expr, names):
    """Compile an expression into f(point_array) -> value.

    ``names`` orders the coordinates; the compiled callable accepts an ndarray
    whose last axis indexes coordinates, so it broadcasts over stacked points.
    """
    expr = parse(expr)
    body = expr.to_python()
    for idx, name in enumerate(names):
        body = body.replace(f"_v[{name!r}]", f"_p[..., {idx}]")
    unknown = expr.variables() - set(names)
    if unknown:
        raise ParseError(f"expression uses {sorted(unknown)} outside chart coordinates {list(names)}")
    code = eval(compile(f"lambda _p, _f=_FUNCS: {body}", "<expr>", "eval"),
                {"_FUNCS": _FUNCS})
    return code
