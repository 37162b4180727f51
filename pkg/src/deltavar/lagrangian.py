"""Lagrangian expressions L(t, u0, ..., ur): parsing, evaluation, partials.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := unary ('^' factor)?          # right-associative
    unary  := '-' unary | atom
    atom   := number | 't' | 'u'digits | func '(' expr ')' | '(' expr ')'

Partial derivatives with respect to the ``u`` slots are propagated in
forward mode: every node evaluates to a value array over the sample points
plus a tangent array with one row per slot.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EvalDomainError, ExprSyntaxError, ValidationError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "t" or "u<k>"

    @property
    def slot(self) -> int | None:
        return None if self.name == "t" else int(self.name[1:])


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


def to_text(node: Node) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, pos = self.take()
        if val != text or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        base = self.unary()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def unary(self) -> Node:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if val in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExprSyntaxError(f"function {val!r} must be called as {val}(...)", pos)
                self.take()
                arg = self.expr()
                if self.peek()[1] == ",":
                    raise ExprSyntaxError(
                        f"function {val!r} takes exactly one argument", self.peek()[2]
                    )
                self.expect(")")
                return Call(val, arg)
            if val == "t" or re.fullmatch(r"u\d+", val):
                if self.peek()[1] == "(":
                    raise ExprSyntaxError(f"{val!r} is a variable, not a function", pos)
                return Var("t" if val == "t" else f"u{int(val[1:])}")
            raise ExprSyntaxError(f"unknown identifier {val!r}", pos)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def _max_var(node: Node) -> int:
    if isinstance(node, Var):
        return -1 if node.slot is None else node.slot
    if isinstance(node, Num):
        return -1
    if isinstance(node, Neg):
        return _max_var(node.operand)
    if isinstance(node, BinOp):
        return max(_max_var(node.left), _max_var(node.right))
    return _max_var(node.arg)


def _has_var(node: Node, slots_only: bool) -> bool:
    if isinstance(node, Var):
        return node.slot is not None or not slots_only
    if isinstance(node, Num):
        return False
    if isinstance(node, Neg):
        return _has_var(node.operand, slots_only)
    if isinstance(node, BinOp):
        return _has_var(node.left, slots_only) or _has_var(node.right, slots_only)
    return _has_var(node.arg, slots_only)


# ------------------------------------------------------------- evaluation


class _Eval:
    """Forward-mode evaluation over m sample points and nvars tangent rows.

    Tangents are ``None`` for subtrees that do not depend on any u slot.
    """

    def __init__(self, t: np.ndarray, u: np.ndarray, tangents: bool):
        self.t = t
        self.u = u
        self.m = t.shape[0]
        self.nvars = u.shape[0]
        self.tangents = tangents

    def fail(self, message: str, node: Node, mask: np.ndarray):
        idx = int(np.flatnonzero(mask)[0]) if np.ndim(mask) else None
        raise EvalDomainError(message, to_text(node), idx)

    def run(self, node: Node):
        if isinstance(node, Num):
            return np.full(self.m, node.value), None
        if isinstance(node, Var):
            k = node.slot
            if k is None:
                return self.t, None
            if k >= self.nvars:
                raise ValidationError(f"variable u{k} exceeds the problem order")
            if not self.tangents:
                return self.u[k], None
            d = np.zeros((self.nvars, self.m))
            d[k] = 1.0
            return self.u[k], d
        if isinstance(node, Neg):
            v, d = self.run(node.operand)
            return -v, None if d is None else -d
        if isinstance(node, Call):
            return self.call(node)
        return self.binop(node)

    def call(self, node: Call):
        x, dx = self.run(node.arg)
        f = node.func
        if f == "sin":
            v, g = np.sin(x), np.cos(x)
        elif f == "cos":
            v, g = np.cos(x), -np.sin(x)
        elif f == "exp":
            with np.errstate(over="ignore"):
                v = np.exp(x)
            g = v
        elif f == "log":
            if np.any(x <= 0):
                self.fail("log of non-positive value", node, x <= 0)
            v, g = np.log(x), None
            if dx is not None:
                g = 1.0 / x
        else:
            if np.any(x < 0):
                self.fail("sqrt of negative value", node, x < 0)
            v = np.sqrt(x)
            g = None
            if dx is not None:
                if np.any(x == 0):
                    self.fail("sqrt is not differentiable at 0", node, x == 0)
                g = 0.5 / v
        return v, None if dx is None else g * dx

    def binop(self, node: BinOp):
        op = node.op
        if op == "^":
            return self.power(node)
        a, da = self.run(node.left)
        b, db = self.run(node.right)
        if op == "+":
            return a + b, _add(da, db)
        if op == "-":
            return a - b, _add(da, None if db is None else -db)
        if op == "*":
            return a * b, _add(None if da is None else da * b, None if db is None else a * db)
        if np.any(b == 0):
            self.fail("division by zero", node, b == 0)
        v = a / b
        d = _add(None if da is None else da / b, None if db is None else -v * db / b)
        return v, d

    def power(self, node: BinOp):
        x, dx = self.run(node.left)
        if not _has_var(node.right, slots_only=False):
            n = _const_value(node.right)
            if float(n).is_integer() and abs(n) <= 1024:
                return self.int_power(node, x, dx, int(n))
        y, dy = self.run(node.right)
        integral = np.equal(np.mod(y, 1.0), 0.0)
        bad = (x < 0) & ~integral if dy is None else (x <= 0)
        if np.any(bad):
            self.fail("power with non-positive base", node, bad)
        if np.any((x == 0) & (y < 0)):
            self.fail("division by zero", node, (x == 0) & (y < 0))
        with np.errstate(over="ignore"):
            v = np.power(x, y)
        d = None
        if dx is not None:
            if np.any((x == 0) & (y < 1) & (y != 0)):
                self.fail("power is not differentiable at base 0", node, x == 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                gx = np.where(y == 0, 0.0, y * np.power(x, y - 1))
            d = gx * dx
        if dy is not None:
            d = _add(d, v * np.log(x) * dy)
        return v, d

    def int_power(self, node: BinOp, x, dx, n: int):
        k = abs(n)
        if n < 0 and np.any(x == 0):
            self.fail("division by zero", node, x == 0)
        # x^(k-1) by repeated multiplication; x^k = x^(k-1) * x
        lower = np.ones_like(x)
        for _ in range(k - 1):
            lower = lower * x
        v = lower * x if k > 0 else lower
        d = None
        if dx is not None and k > 0:
            d = (k * lower) * dx
        if n < 0:
            inv = 1.0 / v
            d = None if d is None else -d * inv * inv
            v = inv
        return v, d


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _const_value(node: Node) -> float:
    ev = _Eval(np.zeros(1), np.zeros((0, 1)), tangents=False)
    return float(ev.run(node)[0][0])


@dataclass(frozen=True)
class LagrangianExpr:
    root: Node

    @property
    def max_var(self) -> int:
        """Highest u-slot index used, or -1 when L has no u variable."""
        return _max_var(self.root)

    def uses_slot(self, k: int) -> bool:
        def walk(n):
            if isinstance(n, Var):
                return n.slot == k
            if isinstance(n, Num):
                return False
            if isinstance(n, Neg):
                return walk(n.operand)
            if isinstance(n, BinOp):
                return walk(n.left) or walk(n.right)
            return walk(n.arg)

        return walk(self.root)

    def __str__(self) -> str:
        return to_text(self.root)

    def _prepare(self, t, u, r):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        nvars = u.shape[0] if r is None else r + 1
        if u.shape[0] != nvars:
            raise ValidationError(f"expected {nvars} slot values, got {u.shape[0]}")
        if self.max_var >= nvars:
            raise ValidationError(
                f"expression uses u{self.max_var} but only u0..u{nvars - 1} are given"
            )
        t = np.broadcast_to(t, (u.shape[1],))
        return t, u

    def evaluate_grid(self, t, u) -> np.ndarray:
        """Values at m points; ``u`` has shape (nslots, m)."""
        t, u = self._prepare(t, u, None)
        with np.errstate(over="ignore", invalid="ignore"):
            v, _ = _Eval(t, u, tangents=False).run(self.root)
        v = np.broadcast_to(v, t.shape).astype(float, copy=True)
        self._check_finite(v)
        return v

    def partials_grid(self, t, u, r: int) -> tuple[np.ndarray, np.ndarray]:
        """Values (m,) and gradients (r+1, m) with respect to u0..ur."""
        t, u = self._prepare(t, u, r)
        with np.errstate(over="ignore", invalid="ignore"):
            v, d = _Eval(t, u, tangents=True).run(self.root)
        v = np.broadcast_to(v, t.shape).astype(float, copy=True)
        grad = np.zeros((r + 1, t.shape[0])) if d is None else np.array(d, dtype=float)
        self._check_finite(v)
        self._check_finite(grad)
        return v, grad

    def _check_finite(self, a: np.ndarray) -> None:
        bad = ~np.isfinite(a)
        if np.any(bad):
            col = int(np.argwhere(bad)[0][-1])
            raise EvalDomainError("non-finite value (overflow)", str(self), col)


def parse(source: str) -> LagrangianExpr:
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return LagrangianExpr(_Parser(source).parse())


def evaluate(expr: LagrangianExpr, t: float, u) -> float:
    return float(expr.evaluate_grid([t], np.asarray(u, dtype=float).reshape(-1, 1))[0])


def partials(expr: LagrangianExpr, t: float, u, r: int) -> tuple[float, np.ndarray]:
    """Value and gradient (dL/du0, ..., dL/dur) at a single point."""
    v, g = expr.partials_grid([t], np.asarray(u, dtype=float).reshape(-1, 1), r)
    return float(v[0]), g[:, 0]


__all__ = [
    "BinOp", "Call", "FUNCTIONS", "LagrangianExpr", "Neg", "Num", "Var",
    "evaluate", "parse", "partials", "to_text",
]
