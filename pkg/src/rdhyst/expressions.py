"""Small arithmetic expression language for model definitions.

Grammar (whitespace-insensitive)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?          # right-associative
    atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

``^`` binds tighter than unary minus, which binds tighter than ``*``/``/``,
which bind tighter than ``+``/``-``.  Functions: exp, log, sqrt, abs, tanh,
sign (unary) and min, max (binary).  Named constants are substituted at
parse time, so evaluation never sees a symbol table.
"""
from __future__ import annotations

import re

import numpy as np

from .errors import EvaluationError, ParseError

__all__ = [
    "Expression",
    "parse_expression",
    "eval_expression",
    "grad_expression",
]

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5

FUNCTIONS = {"exp": 1, "log": 1, "sqrt": 1, "abs": 1, "tanh": 1, "sign": 1,
             "min": 2, "max": 2}


class Expression:
    """Abstract syntax tree node."""

    __slots__ = ()

    def __call__(self, env):
        return eval_expression(self, env)

    def __str__(self):
        return self._fmt()

    def __repr__(self):
        return f"{type(self).__name__}({self._fmt()!r})"

    def _fmt(self):  # pragma: no cover - overridden
        raise NotImplementedError


class Num(Expression):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    @property
    def prec(self):
        return _PREC_NEG if self.value < 0 else _PREC_ATOM

    def _fmt(self):
        return repr(self.value)

    def _eval(self, env):
        return self.value


class Var(Expression):
    __slots__ = ("name",)
    prec = _PREC_ATOM

    def __init__(self, name):
        self.name = name

    def _fmt(self):
        return self.name

    def _eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {self.name!r}") from None


class Neg(Expression):
    __slots__ = ("arg",)
    prec = _PREC_NEG

    def __init__(self, arg):
        self.arg = arg

    def _fmt(self):
        return "-" + _child(self.arg, _PREC_NEG)

    def _eval(self, env):
        return -self.arg._eval(env)


class BinOp(Expression):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right


class Add(BinOp):
    __slots__ = ()
    prec = _PREC_ADD

    def _fmt(self):
        # right operand of the same precedence keeps its parentheses so the
        # reparsed tree (and hence float rounding) is identical
        return f"{_child(self.left, _PREC_ADD)} + {_child(self.right, _PREC_ADD + 1)}"

    def _eval(self, env):
        return self.left._eval(env) + self.right._eval(env)


class Sub(BinOp):
    __slots__ = ()
    prec = _PREC_ADD

    def _fmt(self):
        return f"{_child(self.left, _PREC_ADD)} - {_child(self.right, _PREC_ADD + 1)}"

    def _eval(self, env):
        return self.left._eval(env) - self.right._eval(env)


class Mul(BinOp):
    __slots__ = ()
    prec = _PREC_MUL

    def _fmt(self):
        return f"{_child(self.left, _PREC_MUL)}*{_child(self.right, _PREC_MUL + 1)}"

    def _eval(self, env):
        return self.left._eval(env) * self.right._eval(env)


class Div(BinOp):
    __slots__ = ()
    prec = _PREC_MUL

    def _fmt(self):
        return f"{_child(self.left, _PREC_MUL)}/{_child(self.right, _PREC_MUL + 1)}"

    def _eval(self, env):
        return self.left._eval(env) / self.right._eval(env)


class Pow(BinOp):
    __slots__ = ()
    prec = _PREC_POW

    def _fmt(self):
        return f"{_child(self.left, _PREC_ATOM)}^{_child(self.right, _PREC_NEG)}"

    def _eval(self, env):
        base = self.left._eval(env)
        expo = self.right._eval(env)
        return np.power(np.asarray(base, dtype=np.float64), expo)


_UNARY_FN = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "sign": np.sign,
}
_BINARY_FN = {"min": np.minimum, "max": np.maximum}


class Call(Expression):
    __slots__ = ("func", "args")
    prec = _PREC_ATOM

    def __init__(self, func, args):
        self.func = func
        self.args = tuple(args)

    def _fmt(self):
        inner = ", ".join(a._fmt() for a in self.args)
        return f"{self.func}({inner})"

    def _eval(self, env):
        if len(self.args) == 1:
            arg = np.asarray(self.args[0]._eval(env), dtype=np.float64)
            return _UNARY_FN[self.func](arg)
        a = self.args[0]._eval(env)
        b = self.args[1]._eval(env)
        return _BINARY_FN[self.func](a, b)


def _child(node, min_prec):
    text = node._fmt()
    if node.prec < min_prec:
        return f"({text})"
    return text


# --------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            offset = n - len(stripped)
            raise ParseError(f"unexpected character {stripped[0]!r}", offset=offset)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text, variables, constants):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = frozenset(variables)
        self.constants = dict(constants or {})

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.peek()
        if kind == "op" and val == op:
            return self.advance()
        raise ParseError(f"expected {op!r}, found {val or 'end of input'!r}", offset=off)

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"expected operator or end of input, found {val!r}",
                             offset=off)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.term()
                node = Add(node, rhs) if val == "+" else Sub(node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.factor()
                node = Mul(node, rhs) if val == "*" else Div(node, rhs)
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self):
        node = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return Pow(node, self.factor())
        return node

    def atom(self):
        kind, val, off = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            nxt_kind, nxt_val, _ = self.peek()
            if nxt_kind == "op" and nxt_val == "(":
                return self.call(val, off)
            if val in self.variables:
                return Var(val)
            if val in self.constants:
                return Num(float(self.constants[val]))
            declared = ", ".join(sorted(self.variables | set(self.constants)))
            raise ParseError(
                f"unknown identifier {val!r} (declared: {declared or 'none'})",
                offset=off)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"expected number, identifier or '(', found "
                         f"{val or 'end of input'!r}", offset=off)

    def call(self, name, off):
        if name not in FUNCTIONS:
            raise ParseError(f"unknown function {name!r} (available: "
                             f"{', '.join(sorted(FUNCTIONS))})", offset=off)
        self.expect_op("(")
        args = [self.expr()]
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == ",":
                self.advance()
                args.append(self.expr())
            else:
                break
        self.expect_op(")")
        arity = FUNCTIONS[name]
        if len(args) != arity:
            raise ParseError(f"{name} takes {arity} argument(s), got {len(args)}",
                             offset=off)
        return Call(name, args)


def parse_expression(text, variables=(), constants=None):
    """Parse ``text`` into an Expression.

    ``variables`` are the identifiers allowed as free variables; any other
    identifier must be a key of ``constants`` (substituted as a literal) or
    a known function name, otherwise a ParseError with the byte offset of
    the offending token is raised.
    """
    return _Parser(text, variables, constants).parse()


def eval_expression(expr, env):
    """Evaluate with IEEE-754 double semantics; raises EvaluationError on
    division by zero, log/sqrt domain violations and unbound variables."""
    with np.errstate(divide="raise", invalid="raise", over="ignore"):
        try:
            return expr._eval(env)
        except FloatingPointError as exc:
            raise EvaluationError(f"domain error evaluating {expr}: {exc}") from None
        except ZeroDivisionError:
            raise EvaluationError(f"division by zero evaluating {expr}") from None


# --------------------------------------------------------------------------
# symbolic differentiation with light constant folding


def _is_const(node, value=None):
    if not isinstance(node, Num):
        return False
    return value is None or node.value == value


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Add(a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is_const(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Num(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Mul(a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return Num(0.0)
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def _pow(a, b):
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return Num(1.0)
    return Pow(a, b)


def _diff(node, var):
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return _neg(_diff(node.arg, var))
    if isinstance(node, Add):
        return _add(_diff(node.left, var), _diff(node.right, var))
    if isinstance(node, Sub):
        return _sub(_diff(node.left, var), _diff(node.right, var))
    if isinstance(node, Mul):
        da = _diff(node.left, var)
        db = _diff(node.right, var)
        return _add(_mul(da, node.right), _mul(node.left, db))
    if isinstance(node, Div):
        da = _diff(node.left, var)
        db = _diff(node.right, var)
        num = _sub(_mul(da, node.right), _mul(node.left, db))
        return _div(num, _mul(node.right, node.right))
    if isinstance(node, Pow):
        base, expo = node.left, node.right
        da = _diff(base, var)
        db = _diff(expo, var)
        if _is_const(db, 0.0) and isinstance(expo, Num):
            # d/dx a^c = c a^(c-1) a'
            return _mul(_mul(Num(expo.value), _pow(base, Num(expo.value - 1.0))), da)
        # general: a^b (b' log a + b a'/a)
        inner = _add(_mul(db, Call("log", (base,))),
                     _mul(expo, _div(da, base)))
        return _mul(_pow(base, expo), inner)
    if isinstance(node, Call):
        if node.func == "exp":
            return _mul(node, _diff(node.args[0], var))
        if node.func == "log":
            return _div(_diff(node.args[0], var), node.args[0])
        if node.func == "sqrt":
            return _div(_diff(node.args[0], var), _mul(Num(2.0), node))
        if node.func == "tanh":
            da = _diff(node.args[0], var)
            return _mul(_sub(Num(1.0), _mul(node, node)), da)
        if node.func == "abs":
            # convention: d|x|/dx = sign(x), subgradient 0 at the kink
            return _mul(Call("sign", (node.args[0],)), _diff(node.args[0], var))
        if node.func == "sign":
            return Num(0.0)
        if node.func in ("min", "max"):
            # min(a,b) = (a+b)/2 - |a-b|/2, differentiated piecewise
            a, b = node.args
            da = _diff(a, var)
            db = _diff(b, var)
            mean = _mul(Num(0.5), _add(da, db))
            swing = _mul(Num(0.5), _mul(Call("sign", (_sub(a, b),)), _sub(da, db)))
            return _sub(mean, swing) if node.func == "min" else _add(mean, swing)
    raise TypeError(f"cannot differentiate node {node!r}")


def grad_expression(expr, variables):
    """Partial derivatives of ``expr`` with respect to each name in
    ``variables`` (ordered), as new Expressions."""
    return [_diff(expr, v) for v in variables]
