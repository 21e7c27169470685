"""Expression trees for meromorphic maps: parsing, evaluation, derivatives, class tags.

Grammar (whitespace insignificant)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := ('-'|'+') factor | base ('^' ['-'] integer)?
    base   := 'z' | number | 'i' | '(' expr ')' | func '(' expr ')'
    func   := 'exp' | 'sin' | 'cos' | 'tan'

Serialization emits the same grammar and re-parses to an identical tree.
Evaluation works elementwise on numpy arrays and reports poles/overflow
through a status array rather than raising.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

POLE_TOL = 1e-9
OVERFLOW_CAP = 1e300

FINITE = 0
POLE = 1
OVERFLOW = 2

RATIONAL = "Rational"
CLASS_E = "E"
CLASS_P = "P"
CLASS_M = "M"

FUNCTIONS = ("exp", "sin", "cos", "tan")


class Infinity:
    """The point at infinity of the extended plane."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __reduce__(self):
        return (Infinity, ())


INFINITY = Infinity()


class ExpressionSyntaxError(SyntaxError):
    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.text = text


class UnsupportedFunction(ExpressionSyntaxError):
    pass


class ClassificationAmbiguous(ValueError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Node:
    pass


@dataclass(frozen=True)
class Var(Node):
    pass


@dataclass(frozen=True)
class Const(Node):
    value: complex


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node


Z = Var()
ZERO = Const(0j)
ONE = Const(1 + 0j)

_SCALAR_FUNCS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
}


def _is_const(n: Node, value=None) -> bool:
    return isinstance(n, Const) and (value is None or n.value == value)


def _fold_func(name: str, value: complex) -> complex:
    with np.errstate(all="ignore"):
        return complex(_SCALAR_FUNCS[name](np.complex128(value)))


# Smart constructors: constant folding plus the 0/1 identities.

def neg(a: Node) -> Node:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    return Sub(a, b)


def mul(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if _is_const(b, 1):
        return a
    if _is_const(a, 0) and not _is_const(b, 0):
        return ZERO
    return Div(a, b)


def power(a: Node, n: int) -> Node:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const) and (a.value != 0 or n > 0):
        return Const(a.value ** n)
    return Pow(a, n)


def func(name: str, a: Node) -> Node:
    if isinstance(a, Const):
        value = _fold_func(name, a.value)
        if np.isfinite(value.real) and np.isfinite(value.imag):
            return Const(value)
    return Func(name, a)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        if value == "**":
            value = "^"
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, v, pos = self.take()
        if v != value or kind == "end":
            found = "end of input" if kind == "end" else repr(v)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", pos, self.text)

    def error(self, message: str):
        raise ExpressionSyntaxError(message, self.peek()[2], self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {v!r}", pos, self.text)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.factor()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def factor(self) -> Node:
        kind, v, _ = self.peek()
        if kind == "op" and v in ("-", "+"):
            self.take()
            inner = self.factor()
            return neg(inner) if v == "-" else inner
        node = self.base()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            node = power(node, self.integer())
        return node

    def integer(self) -> int:
        kind, v, pos = self.peek()
        paren = False
        if v == "(":
            paren = True
            self.take()
            kind, v, pos = self.peek()
        sign = 1
        if v in ("-", "+") and kind == "op":
            self.take()
            sign = -1 if v == "-" else 1
            kind, v, pos = self.peek()
        if kind != "num" or not v.isdigit():
            raise ExpressionSyntaxError("exponent must be an integer", pos, self.text)
        self.take()
        if paren:
            self.expect(")")
        return sign * int(v)

    def base(self) -> Node:
        kind, v, pos = self.take()
        if kind == "num":
            return Const(complex(float(v)))
        if kind == "name":
            if v == "z":
                return Z
            if v == "i":
                return Const(1j)
            if self.peek()[1] == "(":
                if v not in FUNCTIONS:
                    raise UnsupportedFunction(f"unsupported function {v!r}", pos, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(v, arg)
            raise ExpressionSyntaxError(f"unknown name {v!r}", pos, self.text)
        if v == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(v)
        raise ExpressionSyntaxError(f"unexpected {found}", pos, self.text)


# ---------------------------------------------------------------------------
# Serialization

def _fmt_real(x: float) -> str:
    s = repr(float(x))
    return f"({s})" if s.startswith("-") else s


def _fmt_const(c: complex) -> str:
    if c.imag == 0:
        return _fmt_real(c.real)
    if c.real == 0:
        return f"({float(c.imag)!r}*i)"
    return f"({float(c.real)!r} + {float(c.imag)!r}*i)"


_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2}


def to_text(node: Node) -> str:
    if isinstance(node, Var):
        return "z"
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Neg):
        return f"(-{_wrap(node.arg, 3)})"
    if isinstance(node, Func):
        return f"{node.name}({to_text(node.arg)})"
    if isinstance(node, Pow):
        base = to_text(node.base)
        if not isinstance(node.base, (Var, Func, Neg, Const)):
            base = f"({base})"
        return f"{base}^{node.exponent}"
    prec = _PREC[type(node)]
    sym = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
    left = _wrap(node.left, prec)
    right = _wrap(node.right, prec + 1)
    return f"{left} {sym} {right}"


def _wrap(node: Node, min_prec: int) -> str:
    text = to_text(node)
    p = _PREC.get(type(node))
    if p is not None and p < min_prec:
        return f"({text})"
    return text


# ---------------------------------------------------------------------------
# Differentiation

def derive(node: Node) -> Node:
    """Symbolic derivative with respect to z."""
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Neg):
        return neg(derive(node.arg))
    if isinstance(node, Add):
        return add(derive(node.left), derive(node.right))
    if isinstance(node, Sub):
        return sub(derive(node.left), derive(node.right))
    if isinstance(node, Mul):
        a, b = node.left, node.right
        return add(mul(derive(a), b), mul(a, derive(b)))
    if isinstance(node, Div):
        a, b = node.left, node.right
        da, db = derive(a), derive(b)
        if _is_const(db, 0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(node, Pow):
        n = node.exponent
        return mul(mul(Const(complex(n)), power(node.base, n - 1)), derive(node.base))
    if isinstance(node, Func):
        u = node.arg
        du = derive(u)
        if node.name == "exp":
            outer = node
        elif node.name == "sin":
            outer = func("cos", u)
        elif node.name == "cos":
            outer = neg(func("sin", u))
        else:
            outer = add(ONE, power(node, 2))
        return mul(outer, du)
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Evaluation

def _compile(node: Node):
    """Compile a tree into ``fn(z, flags) -> w``; ``flags`` collects pole hits."""
    if isinstance(node, Var):
        return lambda z, flags: z
    if isinstance(node, Const):
        c = np.complex128(node.value)
        return lambda z, flags: c
    if isinstance(node, Neg):
        a = _compile(node.arg)
        return lambda z, flags: -a(z, flags)
    if isinstance(node, (Add, Sub, Mul)):
        a, b = _compile(node.left), _compile(node.right)
        if isinstance(node, Add):
            return lambda z, flags: a(z, flags) + b(z, flags)
        if isinstance(node, Sub):
            return lambda z, flags: a(z, flags) - b(z, flags)
        return lambda z, flags: a(z, flags) * b(z, flags)
    if isinstance(node, Div):
        a, b = _compile(node.left), _compile(node.right)

        def _div(z, flags):
            num = a(z, flags)
            den = b(z, flags)
            q = num / den
            _flag_quotient(flags, q, den)
            return q

        return _div
    if isinstance(node, Pow):
        a = _compile(node.base)
        n = node.exponent
        if n > 0:
            return lambda z, flags: a(z, flags) ** n

        def _negpow(z, flags):
            base = a(z, flags)
            q = 1.0 / base ** (-n)
            _flag_quotient(flags, q, base)
            return q

        return _negpow
    if isinstance(node, Func):
        a = _compile(node.arg)
        if node.name == "tan":

            def _tan(z, flags):
                u = a(z, flags)
                flags |= np.abs(np.cos(u)) < POLE_TOL
                return np.tan(u)

            return _tan
        f = _SCALAR_FUNCS[node.name]
        return lambda z, flags: f(a(z, flags))
    raise TypeError(f"unknown node {node!r}")


def _flag_quotient(flags, q, den):
    aq = np.abs(q)
    flags |= (den == 0) | ((np.abs(den) < POLE_TOL) & (aq > 1.0 / POLE_TOL)) | (aq > OVERFLOW_CAP)


@dataclass(frozen=True)
class EvalOutcome:
    kind: str  # "finite" | "pole" | "overflow"
    value: complex | None = None

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"


# ---------------------------------------------------------------------------
# Structural predicates used by classification


def depends_on_z(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Const):
        return False
    return any(depends_on_z(c) for c in _children(node))


def _children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Neg, Func)):
        return (node.arg,)
    if isinstance(node, Pow):
        return (node.base,)
    if isinstance(node, (Add, Sub, Mul, Div)):
        return (node.left, node.right)
    return ()


def walk(node: Node) -> Iterable[Node]:
    yield node
    for c in _children(node):
        yield from walk(c)


def is_transcendental(node: Node) -> bool:
    return any(isinstance(n, Func) for n in walk(node))


def is_zero_free(node: Node) -> bool:
    """True when the expression can be shown to never vanish where it is defined."""
    if isinstance(node, Const):
        return node.value != 0
    if isinstance(node, Func):
        return node.name == "exp"
    if isinstance(node, Neg):
        return is_zero_free(node.arg)
    if isinstance(node, Mul):
        return is_zero_free(node.left) and is_zero_free(node.right)
    if isinstance(node, Div):
        return is_zero_free(node.left) and is_entire(node.right)
    if isinstance(node, Pow):
        return is_zero_free(node.base) if node.exponent > 0 else is_entire(node.base)
    return False


def is_entire(node: Node) -> bool:
    """No syntactic source of poles."""
    for n in walk(node):
        if isinstance(n, Func) and n.name == "tan" and depends_on_z(n.arg):
            return False
        if isinstance(n, Div) and depends_on_z(n.right) and not is_zero_free(n.right):
            return False
        if isinstance(n, Pow) and n.exponent < 0 and depends_on_z(n.base) and not is_zero_free(n.base):
            return False
    return True


def is_polynomial(node: Node) -> bool:
    for n in walk(node):
        if isinstance(n, Func) or (isinstance(n, Div) and depends_on_z(n.right)):
            return False
        if isinstance(n, Pow) and n.exponent < 0 and depends_on_z(n.base):
            return False
    return True


def poly_coeffs(node: Node) -> np.ndarray | None:
    """Power-basis coefficients (ascending) of a polynomial expression, else None."""
    if not is_polynomial(node):
        return None
    P = np.polynomial.Polynomial

    def build(n):
        if isinstance(n, Var):
            return P([0, 1])
        if isinstance(n, Const):
            return P([n.value])
        if isinstance(n, Neg):
            return -build(n.arg)
        if isinstance(n, Add):
            return build(n.left) + build(n.right)
        if isinstance(n, Sub):
            return build(n.left) - build(n.right)
        if isinstance(n, Mul):
            return build(n.left) * build(n.right)
        if isinstance(n, Div):
            return build(n.left) / n.right.value
        if isinstance(n, Pow):
            return build(n.base) ** n.exponent
        raise TypeError(n)

    coef = np.asarray(build(node).coef, dtype=complex)
    nz = np.nonzero(np.abs(coef) > 0)[0]
    return coef[: nz[-1] + 1] if len(nz) else np.zeros(1, complex)


def _linear_root(node: Node) -> complex | None:
    """If node is c*(z - z0)^m with m >= 1, return z0."""
    if isinstance(node, Mul):
        if isinstance(node.left, Const) and node.left.value != 0:
            return _linear_root(node.right)
        if isinstance(node.right, Const) and node.right.value != 0:
            return _linear_root(node.left)
        return None
    if isinstance(node, Pow) and node.exponent > 0:
        return _linear_root(node.base)
    if isinstance(node, Var):
        return 0j
    if isinstance(node, Sub) and isinstance(node.left, Var) and isinstance(node.right, Const):
        return node.right.value
    if isinstance(node, Add) and isinstance(node.left, Var) and isinstance(node.right, Const):
        return -node.right.value
    if isinstance(node, Add) and isinstance(node.right, Var) and isinstance(node.left, Const):
        return -node.left.value
    return None


def _split_additive_const(node: Node) -> tuple[complex, Node]:
    if isinstance(node, Add):
        if isinstance(node.left, Const):
            return node.left.value, node.right
        if isinstance(node.right, Const):
            return node.right.value, node.left
    if isinstance(node, Sub) and isinstance(node.right, Const):
        return -node.right.value, node.left
    return 0j, node


def _class_p_pole(node: Node) -> complex | None:
    """Pole location if node is N/(c (z-z0)^m) with N zero-free entire transcendental."""
    if isinstance(node, Neg):
        return _class_p_pole(node.arg)
    if isinstance(node, Mul):
        for a, b in ((node.left, node.right), (node.right, node.left)):
            if isinstance(a, Const) and a.value != 0:
                return _class_p_pole(b)
            if isinstance(b, Pow) and b.exponent < 0:
                z0 = _linear_root(b.base)
                if z0 is not None and is_zero_free(a) and is_entire(a) and is_transcendental(a):
                    return z0
        return None
    if isinstance(node, Div):
        z0 = _linear_root(node.right)
        a = node.left
        if z0 is not None and is_zero_free(a) and is_entire(a) and is_transcendental(a):
            return z0
    return None


def classify_node(node: Node) -> str:
    if not is_transcendental(node):
        return RATIONAL
    if is_entire(node):
        return CLASS_E
    shift, rest = _split_additive_const(node)
    z0 = _class_p_pole(rest)
    if z0 is not None and abs(z0 - shift) == 0:
        return CLASS_P
    # Pole sources that could cancel against numerator zeros (e.g. (exp(z)-1)/z).
    sources = []
    for n in walk(node):
        if isinstance(n, Func) and n.name == "tan" and depends_on_z(n.arg):
            return CLASS_M
        if isinstance(n, Div) and depends_on_z(n.right) and not is_zero_free(n.right):
            sources.append((n.left, n.right))
        if isinstance(n, Pow) and n.exponent < 0 and depends_on_z(n.base) and not is_zero_free(n.base):
            sources.append((ONE, n.base))
    for num, den in sources:
        if is_transcendental(den) or not depends_on_z(num) or is_zero_free(num):
            return CLASS_M
    raise ClassificationAmbiguous(
        "every pole source is a polynomial denominator under a transcendental numerator; "
        "poles may cancel, pass fn_class explicitly"
    )


def omitted_values(node: Node) -> list[complex]:
    """Finite values syntactically known to be omitted (a + zero-free term)."""
    shift, rest = _split_additive_const(node)
    if depends_on_z(rest) and is_zero_free(rest) and is_transcendental(rest):
        return [shift]
    return []


# ---------------------------------------------------------------------------
# Public wrapper


class MeroFn:
    """A parsed meromorphic map.

    Immutable after construction; ``derivative`` is built on first access.
    ``fn_class`` may be forced with an annotation when the syntactic test is
    inconclusive.
    """

    def __init__(self, ast: Node, fn_class: str | None = None, pole_hints: Iterable[complex] = ()):
        self.ast = ast
        self._annotation = fn_class
        self.pole_hints = tuple(complex(p) for p in pole_hints)
        self._fn = _compile(ast)
        self._hints = np.asarray(self.pole_hints, dtype=complex)

    def __repr__(self):
        return f"MeroFn({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, MeroFn) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)

    @cached_property
    def text(self) -> str:
        return to_text(self.ast)

    @cached_property
    def derivative(self) -> "MeroFn":
        return MeroFn(derive(self.ast), pole_hints=self.pole_hints)

    @cached_property
    def fn_class(self) -> str:
        if self._annotation is not None:
            return self._annotation
        return classify_node(self.ast)

    @cached_property
    def omitted(self) -> list[complex]:
        return omitted_values(self.ast)

    @property
    def is_polynomial(self) -> bool:
        return is_polynomial(self.ast)

    def evaluate(self, z):
        """Vectorized evaluation returning ``(values, status)``.

        ``status`` holds FINITE, POLE or OVERFLOW per element.
        """
        z = np.asarray(z, dtype=complex)
        flags = np.zeros(z.shape, dtype=bool)
        if self._hints.size:
            for p in self._hints:
                flags |= np.abs(z - p) < POLE_TOL
        with np.errstate(all="ignore"):
            w = self._fn(z, flags)
            w = np.broadcast_to(np.asarray(w, dtype=complex), z.shape).copy()
            aw = np.abs(w)
            over = ~flags & ~(aw <= OVERFLOW_CAP)
        status = np.where(flags, POLE, np.where(over, OVERFLOW, FINITE)).astype(np.int8)
        return w, status

    def __call__(self, z):
        w, _ = self.evaluate(z)
        return complex(w) if w.ndim == 0 else w

    def eval(self, z) -> EvalOutcome:
        w, status = self.evaluate(complex(z))
        s = int(status)
        if s == POLE:
            return EvalOutcome("pole")
        if s == OVERFLOW:
            return EvalOutcome("overflow")
        return EvalOutcome("finite", complex(w))


def parse(text: str, fn_class: str | None = None, pole_hints: Iterable[complex] = ()) -> MeroFn:
    if not isinstance(text, str):
        raise TypeError("expression must be a string")
    return MeroFn(_Parser(text).parse(), fn_class=fn_class, pole_hints=pole_hints)


def serialize(f: MeroFn) -> str:
    return f.text


def evaluate(f: MeroFn, z) -> EvalOutcome:
    return f.eval(z)


def differentiate(f: MeroFn) -> MeroFn:
    return f.derivative


def classify_class(f: MeroFn) -> str:
    return f.fn_class


def as_fn(f) -> MeroFn:
    return f if isinstance(f, MeroFn) else parse(f)
