"""A small expression language for bounded Lipschitz payoffs.

Grammar (usual precedence, left-associative)::

    expr    := term (('+' | '-') term)*
    term    := factor ('*' factor)*          # one side must be constant
    factor  := '-' factor | primary
    primary := NUMBER | VAR | CALL | '(' expr ')'
    VAR     := x1 .. xn   (plain ``x`` means x1)
    CALL    := min(e, e, ...) | max(e, e, ...) | abs(e) | neg(e)
             | clamp(e, lo, hi) | sqcap(e, K)

``sqcap(e, K)`` is min(e^2, K^2) with K a positive constant.  Products need a
constant factor, so every expression is globally Lipschitz with a constant
computable from the tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, PayoffSyntaxError


class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    index: int  # 1-based


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # '+', '-', '*'
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: tuple


_ARITY = {"min": (2, None), "max": (2, None), "abs": (1, 1), "neg": (1, 1), "clamp": (3, 3), "sqcap": (2, 2)}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*(),]))"
)


def _tokenize(src: str) -> list:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None:
            bad = src[pos:].lstrip()
            at = len(src) - len(bad)
            raise PayoffSyntaxError(f"unexpected character {bad[0]!r}", len(src[:at].encode()), src)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(src[:start].encode())))
        pos = m.end()
    tokens.append(("end", "", len(src.encode())))
    return tokens


def is_constant(node: Node) -> bool:
    if isinstance(node, Num):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, Neg):
        return is_constant(node.arg)
    if isinstance(node, BinOp):
        return is_constant(node.left) and is_constant(node.right)
    return all(is_constant(a) for a in node.args)


class _Parser:
    def __init__(self, src: str, arity: int):
        self.src = src
        self.arity = arity
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise PayoffSyntaxError(msg, tok[2], self.src)

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text or tok[0] == "num":
            self.fail(f"expected {text!r}, found {tok[1] or 'end of input'!r}")
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] == "*":
            star = self.take()
            rhs = self.factor()
            if not (is_constant(node) or is_constant(rhs)):
                self.fail("product of two non-constant expressions", star)
            node = BinOp("*", node, rhs)
        return node

    def factor(self) -> Node:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.factor())
        return self.primary()

    def primary(self) -> Node:
        tok = self.take()
        kind, text, off = tok
        if kind == "num":
            return Num(float(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            if self.peek()[1] == "(":
                return self.call(tok)
            return self.variable(tok)
        if kind == "end":
            self.fail("unexpected end of input", tok)
        self.fail(f"unexpected {text!r}", tok)

    def variable(self, tok) -> Var:
        _, text, _ = tok
        if text == "x":
            idx = 1
        elif re.fullmatch(r"x[1-9]\d*", text):
            idx = int(text[1:])
        else:
            self.fail(f"unknown identifier {text!r}", tok)
        if idx > self.arity:
            self.fail(f"variable {text} exceeds declared arity {self.arity}", tok)
        return Var(idx)

    def call(self, tok) -> Call:
        name = tok[1]
        if name not in _ARITY:
            self.fail(f"unknown function {name!r}", tok)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        lo, hi = _ARITY[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            self.fail(f"{name} takes {lo if lo == hi else f'at least {lo}'} arguments, got {len(args)}", tok)
        if name == "neg":
            return Neg(args[0])
        if name == "sqcap":
            if not is_constant(args[1]):
                self.fail("sqcap cap must be a constant", tok)
            if _eval(args[1], ()) <= 0:
                self.fail("sqcap cap must be positive", tok)
        return Call(name, tuple(args))


def parse(source: str, arity: int = 1) -> Node:
    """Parse ``source`` into an AST over variables x1..x{arity}."""
    if arity < 1:
        raise InputError("arity must be >= 1")
    return _Parser(source, arity).parse()


def _eval(node: Node, xs):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return xs[node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.arg, xs)
    if isinstance(node, BinOp):
        a, b = _eval(node.left, xs), _eval(node.right, xs)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        return a * b
    args = [_eval(a, xs) for a in node.args]
    name = node.name
    if name == "min":
        out = args[0]
        for a in args[1:]:
            out = np.minimum(out, a)
        return out
    if name == "max":
        out = args[0]
        for a in args[1:]:
            out = np.maximum(out, a)
        return out
    if name == "abs":
        return np.abs(args[0])
    if name == "clamp":
        return np.minimum(np.maximum(args[0], args[1]), args[2])
    if name == "sqcap":
        e, k = args
        # clip first so e*e cannot overflow
        e = np.clip(e, -k, k)
        return e * e
    raise AssertionError(name)


def evaluate(expr: Node, point: Sequence[float], arity: int | None = None) -> float:
    """Value of ``expr`` at one point."""
    pt = np.atleast_1d(np.asarray(point, dtype=float))
    if arity is not None and pt.size != arity:
        raise InputError(f"point has {pt.size} coordinates, payoff arity is {arity}")
    if max_variable(expr) > pt.size:
        raise InputError(f"point has {pt.size} coordinates, expression uses x{max_variable(expr)}")
    return float(_eval(expr, tuple(pt)))


def max_variable(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return 0
    if isinstance(node, Neg):
        return max_variable(node.arg)
    if isinstance(node, BinOp):
        return max(max_variable(node.left), max_variable(node.right))
    return max(max_variable(a) for a in node.args)


def substitute(node: Node, mapping: dict) -> Node:
    """Replace ``Var(i)`` by ``mapping[i]`` wherever ``i`` is a key."""
    if isinstance(node, Var):
        return mapping.get(node.index, node)
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.arg, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    return Call(node.name, tuple(substitute(a, mapping) for a in node.args))


_PREC = {"+": 1, "-": 1, "*": 2}


def to_source(node: Node) -> str:
    """Print an AST so that ``parse(to_source(t)) == t``."""
    return _show(node, 0)


def _num_str(v: float) -> str:
    s = repr(float(v))
    if v < 0:
        return f"({s})"
    return s


def _show(node: Node, ctx: int) -> str:
    if isinstance(node, Num):
        return _num_str(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_show(a, 0) for a in node.args)})"
    if isinstance(node, Neg):
        return "-" + _show(node.arg, 3)
    prec = _PREC[node.op]
    text = f"{_show(node.left, prec)} {node.op} {_show(node.right, prec + 1)}"
    return f"({text})" if prec < ctx else text


def literals(node: Node) -> list:
    if isinstance(node, Num):
        return [node.value]
    if isinstance(node, Var):
        return []
    if isinstance(node, Neg):
        return literals(node.arg)
    if isinstance(node, BinOp):
        return literals(node.left) + literals(node.right)
    return [v for a in node.args for v in literals(a)]


def structural_lipschitz(node: Node, arity: int) -> np.ndarray:
    """Per-variable constants L with |f(x) - f(y)| <= sum_i L_i |x_i - y_i|."""
    if isinstance(node, Num):
        return np.zeros(arity)
    if isinstance(node, Var):
        v = np.zeros(arity)
        v[node.index - 1] = 1.0
        return v
    if isinstance(node, Neg):
        return structural_lipschitz(node.arg, arity)
    if isinstance(node, BinOp):
        if node.op == "*":
            if is_constant(node.left):
                return abs(_eval(node.left, ())) * structural_lipschitz(node.right, arity)
            return abs(_eval(node.right, ())) * structural_lipschitz(node.left, arity)
        return structural_lipschitz(node.left, arity) + structural_lipschitz(node.right, arity)
    if node.name == "sqcap":
        return 2.0 * _eval(node.args[1], ()) * structural_lipschitz(node.args[0], arity)
    return np.max([structural_lipschitz(a, arity) for a in node.args], axis=0)


def interval_range(node: Node, box: np.ndarray) -> tuple[float, float]:
    """Interval-arithmetic enclosure of the values over ``box`` (shape (arity, 2))."""
    if isinstance(node, Num):
        return node.value, node.value
    if isinstance(node, Var):
        lo, hi = box[node.index - 1]
        return float(lo), float(hi)
    if isinstance(node, Neg):
        lo, hi = interval_range(node.arg, box)
        return -hi, -lo
    if isinstance(node, BinOp):
        a, b = interval_range(node.left, box), interval_range(node.right, box)
        if node.op == "+":
            return a[0] + b[0], a[1] + b[1]
        if node.op == "-":
            return a[0] - b[1], a[1] - b[0]
        prods = [x * y for x in a for y in b]
        return min(prods), max(prods)
    rs = [interval_range(a, box) for a in node.args]
    name = node.name
    if name == "min":
        return min(r[0] for r in rs), min(r[1] for r in rs)
    if name == "max":
        return max(r[0] for r in rs), max(r[1] for r in rs)
    if name == "abs":
        lo, hi = rs[0]
        if lo >= 0:
            return lo, hi
        if hi <= 0:
            return -hi, -lo
        return 0.0, max(-lo, hi)
    if name == "clamp":
        (e0, e1), (l0, l1), (h0, h1) = rs
        return min(max(e0, l0), h0), min(max(e1, l1), h1)
    k = rs[1][0]
    lo, hi = rs[0]
    lo, hi = max(lo, -k), min(hi, k)
    if lo > hi:
        return k * k, k * k
    sq = [lo * lo, hi * hi]
    return (0.0 if lo <= 0 <= hi else min(sq)), max(sq)


@dataclass(frozen=True)
class Payoff:
    """A parsed expression with its arity; callable on broadcastable arrays."""

    expr: Node
    arity: int = 1
    source: str = ""

    @classmethod
    def parse(cls, source: str, arity: int = 1) -> "Payoff":
        return cls(parse(source, arity), arity, source)

    def __call__(self, *xs):
        if len(xs) != self.arity:
            raise InputError(f"payoff takes {self.arity} arguments, got {len(xs)}")
        arrays = [np.asarray(x, dtype=float) for x in xs]
        out = _eval(self.expr, tuple(arrays))
        shape = np.broadcast_shapes(*(a.shape for a in arrays))
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    def text(self) -> str:
        return self.source or to_source(self.expr)

    def lipschitz(self) -> float:
        """Structural Lipschitz constant in the max-norm."""
        return float(structural_lipschitz(self.expr, self.arity).sum())

    def support_hint(self) -> float:
        """Largest literal magnitude: where kinks and caps sit."""
        lits = literals(self.expr)
        return max((abs(v) for v in lits), default=0.0)


def as_payoff(phi, arity: int = 1) -> Payoff | None:
    if isinstance(phi, Payoff):
        return phi
    if isinstance(phi, str):
        return Payoff.parse(phi, arity)
    return None


@dataclass
class PayoffCertificate:
    bound_estimate: float
    lipschitz_estimate: float
    structural_lipschitz: float
    structural_bound: float
    box: list


def _box(box, arity: int) -> np.ndarray:
    b = np.asarray(box, dtype=float)
    if b.shape == (2,):
        b = np.tile(b, (arity, 1))
    if b.shape != (arity, 2) or not np.all(np.isfinite(b)) or np.any(b[:, 0] > b[:, 1]):
        raise InputError("box must be a finite (lo, hi) pair per variable")
    return b


def certify(expr, box=(-10.0, 10.0), samples: int = 10_000, *, arity: int | None = None,
            seed: int = 0) -> PayoffCertificate:
    """Sampled bound and Lipschitz estimates next to the structural ones."""
    if isinstance(expr, Payoff):
        arity = arity or expr.arity
        node = expr.expr
    elif isinstance(expr, str):
        arity = arity or 1
        node = parse(expr, arity)
    else:
        node = expr
        arity = arity or max(max_variable(node), 1)
    b = _box(box, arity)
    rng = np.random.default_rng(seed)
    per_axis = max(int(round(2001 ** (1.0 / arity))), 3) if arity <= 2 else 41
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in b]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid_vals = np.asarray(_eval(node, tuple(mesh)), dtype=float) * np.ones(mesh[0].shape)
    pts = b[:, 0] + (b[:, 1] - b[:, 0]) * rng.random((samples, arity))
    rand_vals = np.asarray(_eval(node, tuple(pts.T)), dtype=float) * np.ones(samples)
    bound = float(max(np.abs(grid_vals).max(), np.abs(rand_vals).max()))

    lip = 0.0
    for ax in range(arity):
        step = axes[ax][1] - axes[ax][0]
        if step > 0 and per_axis > 1:
            d = np.abs(np.diff(grid_vals, axis=ax)) / step
            lip = max(lip, float(d.max()))
    width = b[:, 1] - b[:, 0]
    h = 1e-3 * np.where(width > 0, width, 1.0)
    direction = rng.uniform(-1.0, 1.0, (samples, arity)) * h
    shifted = pts + direction
    shifted_vals = np.asarray(_eval(node, tuple(shifted.T)), dtype=float) * np.ones(samples)
    dist = np.abs(direction).max(axis=1)
    ok = dist > 0
    if ok.any():
        lip = max(lip, float((np.abs(shifted_vals - rand_vals)[ok] / dist[ok]).max()))
    lo, hi = interval_range(node, b)
    return PayoffCertificate(
        bound_estimate=bound,
        lipschitz_estimate=lip,
        structural_lipschitz=float(structural_lipschitz(node, arity).sum()),
        structural_bound=max(abs(lo), abs(hi)),
        box=b.tolist(),
    )
