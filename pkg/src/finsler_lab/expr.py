"""Scalar expression language for metrics and immersions.

Grammar (EBNF; whitespace is insignificant)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = atom [ "^" unary ] ;          (* right-associative *)
    atom    = number | name | call | "(" expr ")" ;
    call    = name "(" expr { "," expr } ")" ;
    number  = digits [ "." digits ] [ ("e" | "E") ["+" | "-"] digits ] ;
    name    = letter { letter | digit | "_" } ;

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)`` while
``2^-1`` is ``2^(-1)``.  Functions: ``sqrt, sin, cos, exp, log`` (one
argument) and ``pow`` (two arguments).  The constant ``pi`` is predefined.

Evaluation is generic: bind names to floats for plain numbers or to
:class:`~finsler_lab.jet.Jet` objects for derivatives.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from . import jet as J
from .errors import ExprSyntaxError, JetDomainError, MathDomainError, UnknownIdentifierError

FUNCTIONS = {"sqrt": 1, "sin": 1, "cos": 1, "exp": 1, "log": 1, "pow": 2}
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Const:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    pos: int = field(default=0, compare=False)


Expr = Union[Const, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            off = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[off]!r}", off)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed: set[str]):
        self.toks = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, sym: str):
        kind, val, pos = self.take()
        if val != sym or kind != "op":
            what = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {sym!r}, found {what}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return e

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = BinOp(op, node, self.unary(), pos)
        return node

    def unary(self) -> Expr:
        kind, val, pos = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            operand = self.unary()
            return Neg(operand, pos) if val == "-" else operand
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return BinOp("^", base, self.unary(), pos)
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val), pos)
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {val!r}", pos)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == "," and self.peek()[0] == "op":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[val]:
                    raise ExprSyntaxError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", pos)
                return Call(val, tuple(args), pos)
            if val in self.allowed:
                return Var(val, pos)
            if val in CONSTANTS:
                return Const(CONSTANTS[val], pos)
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} used without arguments", pos)
            raise UnknownIdentifierError(f"unknown variable {val!r}", pos)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", pos)


def parse(text: str, allowed_vars: Sequence[str]) -> Expr:
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, set(allowed_vars)).parse()


# -- printing -----------------------------------------------------------------
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def to_string(e: Expr) -> str:
    """Fully parenthesised rendering that parses back to the same AST."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_string(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    return set().union(*(variables(a) for a in e.args))


# -- evaluation ---------------------------------------------------------------
Number = Union[float, J.Jet]

_FLOAT_FNS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos,
              "exp": math.exp, "log": math.log}


def _call(name: str, args: list, pos: int) -> Number:
    try:
        if name == "pow":
            return _power(args[0], args[1], pos)
        a = args[0]
        if isinstance(a, J.Jet):
            return J.ELEMENTARY[name](a)
        return _FLOAT_FNS[name](a)
    except JetDomainError as err:
        raise JetDomainError(err.fn, err.value, f"{name}() at offset {pos}") from None
    except (ValueError, OverflowError):
        raise JetDomainError(name, float(args[0]), f"offset {pos}") from None


def _power(base: Number, ex: Number, pos: int) -> Number:
    if isinstance(ex, J.Jet):
        if isinstance(base, J.Jet):
            return base ** ex
        return base ** ex  # Jet.__rpow__
    if isinstance(base, J.Jet):
        return J.pow_const(base, float(ex))
    if base < 0 and not float(ex).is_integer():
        raise JetDomainError("pow", base, f"offset {pos}")
    if base == 0 and ex < 0:
        raise JetDomainError("pow", base, f"offset {pos}")
    return float(base) ** float(ex)


def evaluate(e: Expr, bindings: Mapping[str, Number]) -> Number:
    """Evaluate ``e``; the result is a jet iff any bound variable is one."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return bindings[e.name]
        except KeyError:
            raise UnknownIdentifierError(f"unbound variable {e.name!r}", e.pos) from None
    if isinstance(e, Neg):
        return -evaluate(e.operand, bindings)
    if isinstance(e, Call):
        return _call(e.name, [evaluate(a, bindings) for a in e.args], e.pos)
    a = evaluate(e.left, bindings)
    b = evaluate(e.right, bindings)
    try:
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if not isinstance(b, J.Jet) and b == 0:
                raise JetDomainError("div", 0.0)
            return a / b
        return _power(a, b, e.pos)
    except JetDomainError as err:
        raise JetDomainError(err.fn, err.value, f"operator {e.op!r} at offset {e.pos}") from None
    except ZeroDivisionError:
        raise MathDomainError(f"division by zero at offset {e.pos}") from None
