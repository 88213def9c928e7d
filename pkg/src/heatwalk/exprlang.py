"""A small expression language for boundary and initial data.

Grammar (loosest binding first)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?            # right-associative
    atom   := NUMBER | "pi" | "t" | "x" "[" index "]"
            | FUNC "(" expr ")" | "norm" "(" "x" ")"
            | ("sum" | "prod") "(" NAME "," expr ")"
            | "(" expr ")"
    FUNC   := sin | cos | exp | sqrt | abs | log
    index  := INTEGER | NAME               # NAME bound by an enclosing sum/prod

Reductions range over ``0 .. d-1``. Parsing resolves every index against the
dimension and unrolls reductions into a flat instruction tape, so evaluation
is a single pass over numpy arrays; ``t`` may be a scalar or shape ``(n,)``
and ``x`` shape ``(d,)`` or ``(n, d)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs", "log")
REDUCTIONS = ("sum", "prod")
RESERVED = frozenset(FUNCTIONS + REDUCTIONS + ("pi", "t", "x", "norm"))
MAX_DEPTH = 100


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class ExprDomainError(ExprError):
    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message} in {subexpression!r}")
        self.subexpression = subexpression


# -- AST ----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Time:
    pass


@dataclass(frozen=True)
class Coord:
    index: int | str


@dataclass(frozen=True)
class Norm:
    pass


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


@dataclass(frozen=True)
class Reduce:
    kind: str
    var: str
    body: object


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 5


def to_source(node) -> str:
    """Render an AST back to text with the minimum parentheses needed to reparse it."""
    if isinstance(node, Num):
        return _fmt_number(node.value)
    if isinstance(node, Pi):
        return "pi"
    if isinstance(node, Time):
        return "t"
    if isinstance(node, Coord):
        return f"x[{node.index}]"
    if isinstance(node, Norm):
        return "norm(x)"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Reduce):
        return f"{node.kind}({node.var}, {to_source(node.body)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return f"-({inner})" if _prec(node.operand) < _PREC["neg"] else f"-{inner}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left, right = to_source(node.left), to_source(node.right)
        if node.op == "^":
            # base binds tighter than unary minus; exponent may be a unary
            if _prec(node.left) <= p:
                left = f"({left})"
            if _prec(node.right) < _PREC["neg"]:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}" if p == 1 else f"{left}*{right}" if node.op == "*" else f"{left}/{right}"
    raise TypeError(f"not an expression node: {node!r}")


# -- lexer / parser ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),\[\]])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind, text = m.lastgroup, m.group()
        if kind != "ws":
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        for i, ch in enumerate(text):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    toks.append(_Tok("end", "", line, pos - line_start + 1))
    return toks


def _depth(node) -> int:
    deepest, todo = 0, [(node, 1)]
    while todo:
        n, level = todo.pop()
        deepest = max(deepest, level)
        kids = [getattr(n, a) for a in ("left", "right", "operand", "arg", "body") if hasattr(n, a)]
        todo.extend((k, level + 1) for k in kids)
    return deepest


class _Parser:
    def __init__(self, source: str, dim: int):
        self.toks = _tokenize(source)
        self.pos = 0
        self.dim = dim
        self.bound: list[str] = []
        self.depth = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def fail(self, message: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ExprSyntaxError(message, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("op", "name") and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.fail(f"expected {text!r} but found {found!r}")

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            self.fail(f"unexpected {self.tok.text!r}")
        if _depth(node) > MAX_DEPTH:
            # long operator chains nest as deeply as parentheses do
            self.fail(f"expression nested more than {MAX_DEPTH} levels deep", self.toks[0])
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.fail(f"expression nested more than {MAX_DEPTH} levels deep")
        node = Neg(self.unary()) if self.accept("-") else self.power()
        self.depth -= 1
        return node

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                self.fail(f"numeric literal {tok.text!r} overflows a double", tok)
            self.pos += 1
            return Num(value)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind != "name":
            self.fail(f"unexpected {tok.text!r}" if tok.text else "unexpected end of input")
        name = tok.text
        self.pos += 1
        if name == "pi":
            return Pi()
        if name == "t":
            return Time()
        if name == "x":
            return self.coord(tok)
        if name in FUNCTIONS:
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(name, arg)
        if name == "norm":
            self.expect("(")
            self.expect("x")
            self.expect(")")
            return Norm()
        if name in REDUCTIONS:
            self.expect("(")
            var_tok = self.tok
            if var_tok.kind != "name":
                self.fail("expected a reduction index name")
            if var_tok.text in RESERVED:
                self.fail(f"{var_tok.text!r} is reserved and cannot be a reduction index", var_tok)
            if var_tok.text in self.bound:
                self.fail(f"reduction index {var_tok.text!r} is already bound", var_tok)
            self.pos += 1
            self.expect(",")
            self.bound.append(var_tok.text)
            body = self.expr()
            self.bound.pop()
            self.expect(")")
            return Reduce(name, var_tok.text, body)
        if name in self.bound:
            self.fail(f"reduction index {name!r} may only appear inside x[...]", tok)
        self.fail(f"unbound variable {name!r}", tok)

    def coord(self, x_tok: _Tok):
        if self.tok.kind == "op" and self.tok.text == "(":
            self.fail("x is a vector; index it as x[i] or use norm(x)")
        self.expect("[")
        tok = self.tok
        if tok.kind == "num":
            if not re.fullmatch(r"\d+", tok.text):
                self.fail(f"index must be an integer, got {tok.text!r}", tok)
            i = int(tok.text)
            if i >= self.dim:
                self.fail(f"index {i} out of range for dimension {self.dim}", tok)
            index: int | str = i
        elif tok.kind == "name":
            if tok.text not in self.bound:
                self.fail(f"unbound index {tok.text!r}", tok)
            index = tok.text
        else:
            self.fail("expected an index inside x[...]", tok)
        self.pos += 1
        self.expect("]")
        return Coord(index)


# -- compilation to a flat tape ----------------------------------------------------

# instructions are (opcode, argument, source text for diagnostics)


def _compile(node, env: dict[str, int], dim: int, out: list):
    if isinstance(node, Num):
        out.append(("const", node.value, None))
    elif isinstance(node, Pi):
        out.append(("const", math.pi, None))
    elif isinstance(node, Time):
        out.append(("t", None, None))
    elif isinstance(node, Coord):
        i = env[node.index] if isinstance(node.index, str) else node.index
        out.append(("x", i, None))
    elif isinstance(node, Norm):
        out.append(("norm", None, None))
    elif isinstance(node, Neg):
        _compile(node.operand, env, dim, out)
        out.append(("neg", None, None))
    elif isinstance(node, BinOp):
        _compile(node.left, env, dim, out)
        _compile(node.right, env, dim, out)
        out.append((node.op, None, to_source(node)))
    elif isinstance(node, Call):
        _compile(node.arg, env, dim, out)
        out.append((node.func, None, to_source(node)))
    elif isinstance(node, Reduce):
        op = "+" if node.kind == "sum" else "*"
        for i in range(dim):
            _compile(node.body, {**env, node.var: i}, dim, out)
            if i:
                out.append((op, None, None))
    else:
        raise TypeError(f"not an expression node: {node!r}")


def _check(ok, message, where):
    if not np.all(ok):
        raise ExprDomainError(message, where)


def _has_nan(v) -> np.ndarray:
    return np.isnan(v) if isinstance(v, (np.ndarray, float, np.floating)) else np.False_


def _run(tape, t, x):
    stack: list = []
    push, pop = stack.append, stack.pop
    with np.errstate(all="ignore"):
        for op, arg, where in tape:
            if op == "const":
                push(arg)
            elif op == "t":
                push(t)
            elif op == "x":
                push(x[..., arg])
            elif op == "norm":
                push(np.sqrt(np.sum(x * x, axis=-1)))
            elif op == "neg":
                push(-pop())
            elif op in ("sin", "cos", "exp", "abs", "sqrt", "log"):
                a = pop()
                if op == "sqrt":
                    _check(np.asarray(a) >= 0.0, "square root of a negative number", where)
                elif op == "log":
                    _check(np.asarray(a) > 0.0, "logarithm of a non-positive number", where)
                r = getattr(np, op)(a)
                _check(~np.isnan(r) | _has_nan(a), "result is undefined", where)
                push(r)
            else:
                b, a = pop(), pop()
                if op == "+":
                    r = a + b
                elif op == "-":
                    r = a - b
                elif op == "*":
                    r = a * b
                elif op == "/":
                    _check(np.asarray(b) != 0.0, "division by zero", where)
                    r = a / b
                else:
                    r = np.power(a, b)
                _check(~np.isnan(r) | _has_nan(a) | _has_nan(b), "result is undefined", where)
                push(r)
    (result,) = stack
    return result


@dataclass(frozen=True)
class Expr:
    """A parsed expression bound to a dimension; call it as ``expr(t, x)``."""

    source: str
    dim: int
    ast: object
    tape: tuple

    def __call__(self, t, x):
        return evaluate(self, t, x)

    def __str__(self) -> str:
        return to_source(self.ast)


def parse(source: str, dim: int) -> Expr:
    """Parse ``source`` for points of dimension ``dim``; raises :class:`ExprSyntaxError`."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    ast = _Parser(source, dim).parse()
    tape: list = []
    _compile(ast, {}, dim, tape)
    return Expr(source, dim, ast, tuple(tape))


def evaluate(expr: Expr, t, x):
    """Evaluate in IEEE double precision. Scalar inputs give a float, batched inputs an array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != expr.dim:
        raise ExprError(f"expected points of dimension {expr.dim}, got shape {x.shape}")
    t = np.asarray(t, dtype=np.float64)
    batch = np.broadcast_shapes(t.shape, x.shape[:-1])
    out = _run(expr.tape, t, x)
    out = np.broadcast_to(np.asarray(out, dtype=np.float64), batch)
    return float(out) if out.ndim == 0 else out.copy()
