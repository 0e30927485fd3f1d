"""Coordinate-expression language.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('-' | '+') factor | base ('^' integer)?
    base   := number | 'x' digits | func '(' expr ')' | '(' expr ')'
    func   := sin | cos | exp | log | sqrt | tanh

Expressions are parsed once into a small tree and compiled into two closures:
a fast one over plain floats and a generic one over :mod:`prehomog.ad`
numbers.  Evaluation errors (division by zero, log of a non-positive number,
...) surface as :class:`~prehomog.errors.DomainError` at evaluation time.
"""

import math
import re

from . import ad
from .errors import DomainError, ParseError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")

_FLOAT_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "tanh": math.tanh,
}
_AD_FUNCS = {name: getattr(ad, name) for name in FUNCTIONS}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def tokenize(text):
    """Split ``text`` into ``(kind, value, column)`` triples (1-based column)."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", 1, pos + 1, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class Node:
    def source(self):
        raise NotImplementedError

    def variables(self):
        return set()


class Num(Node):
    def __init__(self, value):
        self.value = value

    def source(self):
        return repr(self.value)

    def compile(self, funcs, generic):
        v = self.value
        return lambda xs: v


class Var(Node):
    def __init__(self, index):
        self.index = index  # 0-based

    def source(self):
        return f"x{self.index + 1}"

    def variables(self):
        return {self.index}

    def compile(self, funcs, generic):
        i = self.index
        return lambda xs: xs[i]


class Neg(Node):
    def __init__(self, arg):
        self.arg = arg

    def source(self):
        return f"(-{self.arg.source()})"

    def variables(self):
        return self.arg.variables()

    def compile(self, funcs, generic):
        f = self.arg.compile(funcs, generic)
        return lambda xs: -f(xs)


class BinOp(Node):
    def __init__(self, op, left, right):
        self.op = op
        self.left = left
        self.right = right

    def source(self):
        return f"({self.left.source()}{self.op}{self.right.source()})"

    def variables(self):
        return self.left.variables() | self.right.variables()

    def compile(self, funcs, generic):
        f = self.left.compile(funcs, generic)
        g = self.right.compile(funcs, generic)
        op = self.op
        if op == "+":
            return lambda xs: f(xs) + g(xs)
        if op == "-":
            return lambda xs: f(xs) - g(xs)
        if op == "*":
            return lambda xs: f(xs) * g(xs)
        if generic:
            return lambda xs: ad.div(f(xs), g(xs))
        return lambda xs: f(xs) / g(xs)


class Pow(Node):
    def __init__(self, base, exponent):
        self.base = base
        self.exponent = exponent

    def source(self):
        return f"({self.base.source()}^{self.exponent})"

    def variables(self):
        return self.base.variables()

    def compile(self, funcs, generic):
        f = self.base.compile(funcs, generic)
        k = self.exponent
        if generic:
            return lambda xs: ad.ipow(f(xs), k)
        return lambda xs: float(f(xs)) ** k


class Call(Node):
    def __init__(self, name, arg):
        self.name = name
        self.arg = arg

    def source(self):
        return f"{self.name}({self.arg.source()})"

    def variables(self):
        return self.arg.variables()

    def compile(self, funcs, generic):
        f = self.arg.compile(funcs, generic)
        fn = funcs[self.name]
        return lambda xs: fn(f(xs))


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, 1, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] not in ("op",):
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise self.error(f"expected {value!r}, found {what}")
        return self.advance()

    def close(self, opening):
        if self.peek()[0] == "end":
            raise self.error("unclosed '('", opening)
        return self.expect(")")

    def parse(self):
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("-", "+"):
            self.advance()
            arg = self.factor()
            return Neg(arg) if tok[1] == "-" else arg
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            sign = 1
            if self.peek()[0] == "op" and self.peek()[1] in ("-", "+"):
                sign = -1 if self.advance()[1] == "-" else 1
            tok = self.peek()
            if tok[0] != "number" or not tok[1].isdigit():
                raise self.error("exponent must be an integer")
            self.advance()
            node = Pow(node, sign * int(tok[1]))
        return node

    def base(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "number":
            self.advance()
            return Num(float(value))
        if kind == "var":
            self.advance()
            index = int(value[1:])
            if index < 1:
                raise self.error("coordinates are numbered from x1", tok)
            return Var(index - 1)
        if kind == "name":
            if value not in FUNCTIONS:
                raise self.error(f"unknown function {value!r}", tok)
            self.advance()
            opening = self.expect("(")
            arg = self.expr()
            self.close(opening)
            return Call(value, arg)
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            self.close(tok)
            return node
        what = "end of input" if kind == "end" else repr(value)
        raise self.error(f"expected a number, coordinate, function or '(', found {what}")


class ScalarExpr:
    """A parsed scalar expression in the coordinates ``x1..xn``.

    Calling the object with a sequence of coordinates evaluates it; the
    coordinates may be floats or :class:`~prehomog.ad.Dual` numbers.
    """

    __slots__ = ("text", "root", "_float", "_generic", "n_vars", "_const")

    def __init__(self, text):
        self.text = text
        self.root = _Parser(text).parse()
        variables = self.root.variables()
        self.n_vars = max(variables) + 1 if variables else 0
        self._float = self.root.compile(_FLOAT_FUNCS, generic=False)
        self._generic = self.root.compile(_AD_FUNCS, generic=True)
        self._const = not variables

    def __repr__(self):
        return f"ScalarExpr({self.text!r})"

    def __str__(self):
        return self.text

    def canonical(self):
        """Fully parenthesised form, used to compare expressions structurally."""
        return self.root.source()

    @property
    def is_constant(self):
        return self._const

    def __call__(self, coords):
        if len(coords) < self.n_vars:
            raise DomainError(f"{self.text!r} uses x{self.n_vars} but only {len(coords)} coordinates given")
        if any(isinstance(c, ad.Dual) for c in coords):
            return self._generic(coords)
        try:
            value = self._float([float(c) for c in coords])
        except (ZeroDivisionError, ValueError, OverflowError) as err:
            raise DomainError(f"cannot evaluate {self.text!r} at {list(coords)}: {err}") from err
        if not math.isfinite(value):
            raise DomainError(f"{self.text!r} is not finite at {list(coords)}")
        return value


def parse(text):
    """Parse ``text`` into a :class:`ScalarExpr` (raises ParseError)."""
    if isinstance(text, ScalarExpr):
        return text
    return ScalarExpr(str(text))
