"""Small scalar expression language for weights, boundary data and test functions.

Grammar (no implicit multiplication, functions need parentheses)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Variables are restricted to ``x, x1, x2, ..., y, y1, y2, ..., t``; ``y`` and
``y1`` name the same quantity.  ``pi`` is accepted as a named constant.

Trees are immutable and can be evaluated on floats or numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")
NAMED_CONSTANTS = {"pi": math.pi}

_VARIABLE_RE = re.compile(r"^(x\d*|y\d*|t)$")
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)

# binding strength used by the printer
_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class ExprDomainError(ExprError, ArithmeticError):
    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message}: {subexpression}")
        self.subexpression = subexpression


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCTIONS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]
Value = Union[float, np.ndarray]


def canonical_name(name: str) -> str:
    return "y1" if name == "y" else name


def is_variable_name(name: str) -> bool:
    return bool(_VARIABLE_RE.match(name))


# ---------------------------------------------------------------------------
# parsing


class _Parser:
    def __init__(self, text: str, variables: Iterable[str]):
        self.text = text
        self.variables = set(variables)
        self.tokens = self._tokenize(text)
        self.i = 0

    @staticmethod
    def _tokenize(text):
        tokens = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                bad = len(text) - len(text[pos:].lstrip())
                raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), start))
            pos = m.end()
        tokens.append(("end", "", len(text)))
        return tokens

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                nxt = self.peek()
                if nxt[1] != "(":
                    raise ExprSyntaxError(f"function {text!r} requires parentheses", nxt[2])
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if text in NAMED_CONSTANTS:
                return Const(NAMED_CONSTANTS[text])
            if text in self.variables:
                return Var(text)
            raise UnknownIdentifierError(text, pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse(text: str, variables: Iterable[str]) -> Expr:
    """Parse ``text`` into an expression tree over the declared ``variables``.

    Raises ExprSyntaxError (with the character position) on malformed input
    and UnknownIdentifierError for names outside ``variables``.
    """
    variables = list(variables)
    for v in variables:
        if not is_variable_name(v):
            raise ValueError(f"{v!r} is not an admissible variable name")
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, variables).parse()


# ---------------------------------------------------------------------------
# printing


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        return _PREC_NEG if e.value < 0 else _PREC_ATOM
    if isinstance(e, Var):
        return _PREC_ATOM
    if isinstance(e, Unary):
        return _PREC_NEG if e.op == "neg" else _PREC_ATOM
    if e.op in "+-":
        return _PREC_ADD
    if e.op in "*/":
        return _PREC_MUL
    return _PREC_POW


def _wrap(e: Expr, parens: bool) -> str:
    s = to_string(e)
    return f"({s})" if parens else s


def to_string(e: Expr) -> str:
    """Print with the minimal parentheses needed to re-parse to the same tree."""
    if isinstance(e, Const):
        if not math.isfinite(e.value):
            raise ExprError(f"cannot print non-finite constant {e.value}")
        if e.value < 0:
            return "-" + _fmt_number(-e.value)
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + _wrap(e.arg, _prec(e.arg) < _PREC_NEG)
        return f"{e.op}({to_string(e.arg)})"
    p = _prec(e)
    if e.op == "^":
        left = _wrap(e.left, _prec(e.left) <= _PREC_POW)
        right = _wrap(e.right, _prec(e.right) < _PREC_NEG)
        return f"{left}^{right}"
    left = _wrap(e.left, _prec(e.left) < p)
    right = _wrap(e.right, _prec(e.right) <= p)
    return f"{left} {e.op} {right}"


# ---------------------------------------------------------------------------
# evaluation


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, Unary):
        return free_variables(e.arg)
    return free_variables(e.left) | free_variables(e.right)


def _lookup(name: str, bindings: Mapping[str, Value]) -> Value:
    if name in bindings:
        return bindings[name]
    alias = {"y": "y1", "y1": "y"}.get(name)
    if alias is not None and alias in bindings:
        return bindings[alias]
    raise KeyError(f"no binding for variable {name!r}")


_UNARY = {
    "neg": np.negative,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


def _check(node: Expr, result, *operands):
    result = np.asarray(result)
    if np.all(np.isfinite(result)):
        return
    ok_inputs = np.ones(result.shape, dtype=bool)
    for op in operands:
        ok_inputs = ok_inputs & np.isfinite(np.broadcast_to(op, result.shape))
    if np.any(~np.isfinite(result) & ok_inputs):
        raise ExprDomainError("non-finite value", to_string(node))


def _ev(e: Expr, env: Mapping[str, Value]):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return np.asarray(_lookup(e.name, env), dtype=float)
    if isinstance(e, Unary):
        a = _ev(e.arg, env)
        if e.op == "log" and np.any(np.asarray(a) <= 0):
            raise ExprDomainError("log of non-positive value", to_string(e))
        if e.op == "sqrt" and np.any(np.asarray(a) < 0):
            raise ExprDomainError("sqrt of negative value", to_string(e))
        r = _UNARY[e.op](a)
        _check(e, r, a)
        return r
    a = _ev(e.left, env)
    b = _ev(e.right, env)
    if e.op == "+":
        r = a + b
    elif e.op == "-":
        r = a - b
    elif e.op == "*":
        r = a * b
    elif e.op == "/":
        if np.any(np.asarray(b) == 0):
            raise ExprDomainError("division by zero", to_string(e))
        r = a / b
    else:
        r = np.power(a, b)
    _check(e, r, a, b)
    return r


def evaluate(e: Expr, bindings: Mapping[str, Value]) -> Value:
    """Evaluate on scalars or broadcastable arrays.

    Raises ExprDomainError naming the offending subexpression, e.g. for the
    log of a non-positive value.
    """
    with np.errstate(all="ignore"):
        r = _ev(e, bindings)
    if np.ndim(r) == 0:
        return float(r)
    return np.asarray(r, dtype=float)


# ---------------------------------------------------------------------------
# differentiation

ZERO = Const(0.0)
ONE = Const(1.0)


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def _add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return Binary("+", a, b)


def _sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return _neg(b)
    return Binary("-", a, b)


def _neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    return Unary("neg", a)


def _mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    return Binary("*", a, b)


def _div(a, b):
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    return Binary("/", a, b)


def _depends_on(e: Expr, var: str) -> bool:
    c = canonical_name(var)
    return any(canonical_name(n) == c for n in free_variables(e))


def differentiate(e: Expr, var: str) -> Expr:
    """Exact partial derivative with respect to ``var`` (no simplification pass)."""
    if not is_variable_name(var):
        raise ValueError(f"{var!r} is not an admissible variable name")
    target = canonical_name(var)

    def d(n: Expr) -> Expr:
        if isinstance(n, Const):
            return ZERO
        if isinstance(n, Var):
            return ONE if canonical_name(n.name) == target else ZERO
        if isinstance(n, Unary):
            u = n.arg
            du = d(u)
            if _is(du, 0):
                return ZERO
            if n.op == "neg":
                return _neg(du)
            if n.op == "sin":
                return _mul(Unary("cos", u), du)
            if n.op == "cos":
                return _neg(_mul(Unary("sin", u), du))
            if n.op == "tan":
                return _div(du, Binary("^", Unary("cos", u), Const(2.0)))
            if n.op == "exp":
                return _mul(n, du)
            if n.op == "log":
                return _div(du, u)
            if n.op == "sqrt":
                return _div(du, _mul(Const(2.0), n))
            if n.op == "abs":
                return _mul(_div(u, n), du)
            raise AssertionError(n.op)
        a, b = n.left, n.right
        if n.op == "+":
            return _add(d(a), d(b))
        if n.op == "-":
            return _sub(d(a), d(b))
        if n.op == "*":
            return _add(_mul(d(a), b), _mul(a, d(b)))
        if n.op == "/":
            return _div(_sub(_mul(d(a), b), _mul(a, d(b))), Binary("^", b, Const(2.0)))
        # power
        if not _depends_on(b, var):
            da = d(a)
            if _is(da, 0):
                return ZERO
            return _mul(_mul(b, Binary("^", a, _sub(b, ONE))), da)
        # u^v = exp(v log u): d = u^v (v' log u + v u'/u)
        inner = _add(_mul(d(b), Unary("log", a)), _div(_mul(b, d(a)), a))
        return _mul(n, inner)

    return d(e)


class Function:
    """A parsed expression bundled with its declared variables.

    Convenience wrapper used by configs: ``Function("-log(cos(x))", ["x"])(x=0.3)``.
    """

    def __init__(self, text_or_expr, variables: Iterable[str]):
        self.variables = tuple(variables)
        if isinstance(text_or_expr, str):
            self.expr = parse(text_or_expr, self.variables)
        else:
            self.expr = text_or_expr
        self._partials: dict[str, Function] = {}

    def __call__(self, **bindings) -> Value:
        return evaluate(self.expr, bindings)

    def __repr__(self):
        return f"Function({to_string(self.expr)!r}, {list(self.variables)!r})"

    def __str__(self):
        return to_string(self.expr)

    def partial(self, var: str) -> "Function":
        key = canonical_name(var)
        if key not in self._partials:
            self._partials[key] = Function(differentiate(self.expr, var), self.variables)
        return self._partials[key]

    def depends_on(self, var: str) -> bool:
        return _depends_on(self.expr, var)

    def is_constant(self) -> bool:
        return not free_variables(self.expr)
