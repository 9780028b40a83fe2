"""Truncated multivariate Taylor jets (forward-mode AD of arbitrary fixed order).

A :class:`Jet` stores the Taylor coefficients of a function of ``num_vars``
variables about a point, up to total degree ``order``.  Coefficients are kept
in a dense vector indexed by monomials in graded lexicographic order
(degree 0, then ``v0, v1, ...``, then ``v0^2, v0 v1, ...``).

Storage convention: the entry for multi-index ``mu`` is the *Taylor
coefficient* ``d^mu f / mu!`` where ``mu! = prod(mu_i!)``.  :func:`extract`
multiplies by ``mu!`` and returns the true partial derivative.  Keeping
Taylor coefficients makes multiplication a plain truncated convolution.

Jets of different ``num_vars`` or ``order`` never mix; plain Python numbers
are promoted to constant jets.
"""

from __future__ import annotations

import functools
import itertools
import math
from typing import Callable, Sequence

import numpy as np

from .errors import JetDomainError

DEFAULT_ORDER = 3


class _Table:
    """Monomial bookkeeping for one (num_vars, order) pair."""

    def __init__(self, num_vars: int, order: int):
        self.num_vars = num_vars
        self.order = order
        monos = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(num_vars), d):
                mu = [0] * num_vars
                for v in combo:
                    mu[v] += 1
                monos.append(tuple(mu))
        self.monomials: tuple[tuple[int, ...], ...] = tuple(monos)
        self.index = {mu: k for k, mu in enumerate(monos)}
        self.size = len(monos)
        self.degree = np.array([sum(mu) for mu in monos])
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in mu) for mu in monos], dtype=float
        )

        ia, ib, ic = [], [], []
        for a, ma in enumerate(monos):
            da = self.degree[a]
            for b, mb in enumerate(monos):
                if da + self.degree[b] > order:
                    continue
                ia.append(a)
                ib.append(b)
                ic.append(self.index[tuple(x + y for x, y in zip(ma, mb))])
        self.mul_a = np.array(ia, dtype=np.intp)
        self.mul_b = np.array(ib, dtype=np.intp)
        self.mul_c = np.array(ic, dtype=np.intp)

    @functools.cached_property
    def _deriv_maps(self):
        # per variable: (source slots, target slots in the order-1 table, factors)
        lower = table(self.num_vars, self.order - 1)
        maps = []
        for v in range(self.num_vars):
            src, dst, fac = [], [], []
            for k, mu in enumerate(self.monomials):
                if mu[v] == 0:
                    continue
                nu = list(mu)
                nu[v] -= 1
                src.append(k)
                dst.append(lower.index[tuple(nu)])
                fac.append(float(mu[v]))
            maps.append((np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp),
                         np.array(fac)))
        return maps

    def deriv_map(self, var: int):
        return self._deriv_maps[var]


@functools.lru_cache(maxsize=None)
def table(num_vars: int, order: int) -> _Table:
    if num_vars < 1:
        raise ValueError("num_vars must be positive")
    if order < 0:
        raise ValueError("order must be non-negative")
    return _Table(num_vars, order)


class Jet:
    """Truncated Taylor expansion of a scalar function."""

    __slots__ = ("coeffs", "_t")
    # keep numpy from broadcasting itself into our binary operators
    __array_ufunc__ = None

    def __init__(self, coeffs: np.ndarray, tab: _Table):
        if coeffs.shape != (tab.size,):
            raise ValueError("coefficient vector does not match the monomial table")
        self.coeffs = coeffs
        self._t = tab

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value: float, num_vars: int, order: int = DEFAULT_ORDER) -> "Jet":
        tab = table(num_vars, order)
        c = np.zeros(tab.size)
        c[0] = value
        return cls(c, tab)

    def like(self, value: float) -> "Jet":
        c = np.zeros(self._t.size)
        c[0] = value
        return Jet(c, self._t)

    # -- properties -------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return self._t.num_vars

    @property
    def order(self) -> int:
        return self._t.order

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    @property
    def table(self) -> _Table:
        return self._t

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"Jet(value={self.value!r}, num_vars={self.num_vars}, order={self.order})"

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other._t is not self._t:
                raise ValueError(
                    "incompatible jets: "
                    f"({self.num_vars} vars, order {self.order}) vs "
                    f"({other.num_vars} vars, order {other.order})"
                )
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.like(float(other))
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Jet(self.coeffs + o.coeffs, self._t)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Jet(self.coeffs - o.coeffs, self._t)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Jet(o.coeffs - self.coeffs, self._t)

    def __neg__(self):
        return Jet(-self.coeffs, self._t)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.coeffs * float(other), self._t)
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        t = self._t
        prod = self.coeffs[t.mul_a] * o.coeffs[t.mul_b]
        return Jet(np.bincount(t.mul_c, weights=prod, minlength=t.size), t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            if other == 0:
                raise JetDomainError("div", 0.0)
            return Jet(self.coeffs / float(other), self._t)
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * reciprocal(o)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o * reciprocal(self)

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return exp(exponent * log(self))
        return pow_const(self, float(exponent))

    def __rpow__(self, base):
        if base <= 0:
            raise JetDomainError("pow", float(base))
        return exp(self * math.log(base))


# -- constructors -------------------------------------------------------------
def lift_variable(value: float, var_index: int, num_vars: int,
                  order: int = DEFAULT_ORDER) -> Jet:
    """Jet of the coordinate function ``v_var_index`` evaluated at ``value``."""
    if not 0 <= var_index < num_vars:
        raise IndexError(f"var_index {var_index} out of range for {num_vars} variables")
    j = Jet.constant(value, num_vars, order)
    if order >= 1:
        mu = [0] * num_vars
        mu[var_index] = 1
        j.coeffs[j.table.index[tuple(mu)]] = 1.0
    return j


def lift_point(values: Sequence[float], order: int = DEFAULT_ORDER) -> list[Jet]:
    """Lift every coordinate of ``values`` as an independent variable."""
    n = len(values)
    return [lift_variable(float(v), i, n, order) for i, v in enumerate(values)]


def from_taylor(coeffs: dict, num_vars: int, order: int = DEFAULT_ORDER) -> Jet:
    """Build a jet from ``{multi_index: taylor_coefficient}``."""
    tab = table(num_vars, order)
    c = np.zeros(tab.size)
    for mu, val in coeffs.items():
        mu = tuple(mu)
        if len(mu) != num_vars or sum(mu) > order:
            raise ValueError(f"multi-index {mu} does not fit ({num_vars}, {order})")
        c[tab.index[mu]] = val
    return Jet(c, tab)


def jet_arithmetic(op: str, a: Jet, b: Jet | None = None) -> Jet:
    """Named dispatch onto the operators (add, sub, mul, div, neg)."""
    if op == "neg":
        return -a
    ops: dict[str, Callable] = {
        "add": lambda: a + b,
        "sub": lambda: a - b,
        "mul": lambda: a * b,
        "div": lambda: a / b,
    }
    if op not in ops:
        raise ValueError(f"unknown jet operation {op!r}")
    return ops[op]()


# -- extraction ---------------------------------------------------------------
def extract(a: Jet, multi_index: Sequence[int]) -> float:
    """True partial derivative ``d^|mu| f / dv^mu`` at the expansion point."""
    mu = tuple(int(m) for m in multi_index)
    if len(mu) != a.num_vars:
        raise ValueError(f"multi-index length {len(mu)} != num_vars {a.num_vars}")
    if sum(mu) > a.order:
        raise ValueError(f"multi-index degree {sum(mu)} exceeds jet order {a.order}")
    k = a.table.index[mu]
    return float(a.coeffs[k] * a.table.factorial[k])


def taylor_coefficient(a: Jet, multi_index: Sequence[int]) -> float:
    return float(a.coeffs[a.table.index[tuple(multi_index)]])


def gradient(a: Jet) -> np.ndarray:
    if a.order < 1:
        raise ValueError("order-0 jet carries no gradient")
    return a.coeffs[1:1 + a.num_vars].copy()


def derivative(a: Jet, var: int) -> Jet:
    """Jet (one order lower) of the partial derivative along ``var``."""
    if a.order < 1:
        raise ValueError("cannot differentiate an order-0 jet")
    src, dst, fac = a.table.deriv_map(var)
    lower = table(a.num_vars, a.order - 1)
    c = np.zeros(lower.size)
    c[dst] = a.coeffs[src] * fac
    return Jet(c, lower)


def truncate(a: Jet, order: int) -> Jet:
    if order > a.order:
        raise ValueError("cannot raise the order of a jet")
    if order == a.order:
        return a
    lower = table(a.num_vars, order)
    return Jet(a.coeffs[:lower.size].copy(), lower)


def compose(outer: Jet, inner: Sequence[Jet]) -> Jet:
    """Chain rule: ``outer(z)`` with ``z = inner`` about ``z0 = inner.value``.

    The caller guarantees ``outer`` was expanded at the values of ``inner``.
    The result has the order of the inner jets, and outer terms of degree
    above that order are dropped.
    """
    if len(inner) != outer.num_vars:
        raise ValueError("need one inner jet per outer variable")
    tab_in = inner[0].table
    r = min(tab_in.order, outer.order)
    dz = [z - z.value for z in inner]
    tab_out = outer.table
    mons: list[Jet | None] = [None] * tab_out.size
    mons[0] = inner[0].like(1.0)
    acc = inner[0].like(0.0)
    acc.coeffs[0] = outer.coeffs[0]
    for k in range(1, tab_out.size):
        mu = tab_out.monomials[k]
        if sum(mu) > r:
            break
        v = next(i for i, e in enumerate(mu) if e)
        nu = list(mu)
        nu[v] -= 1
        mons[k] = mons[tab_out.index[tuple(nu)]] * dz[v]
        if outer.coeffs[k] != 0.0:
            acc = acc + mons[k] * float(outer.coeffs[k])
    return acc


# -- elementary functions -----------------------------------------------------
def _series(a: Jet, c: Sequence[float]) -> Jet:
    """Evaluate ``sum_k c[k] h^k`` with ``h = a - a.value`` (Horner)."""
    h = a - a.value
    r = a.like(c[a.order])
    for k in range(a.order - 1, -1, -1):
        r = r * h + c[k]
    return r


def _binomial_series(x0: float, p: float, order: int) -> list[float]:
    c = []
    coef = 1.0
    for k in range(order + 1):
        c.append(coef * x0 ** (p - k))
        coef *= (p - k) / (k + 1)
    return c


def pow_const(a: Jet, p: float) -> Jet:
    x0 = a.value
    if float(p).is_integer():
        ip = int(p)
        if ip >= 0:
            r = a.like(1.0)
            base = a
            while ip:
                if ip & 1:
                    r = r * base
                ip >>= 1
                if ip:
                    base = base * base
            return r
        if x0 == 0.0:
            raise JetDomainError("pow", x0)
        return _series(a, _binomial_series(x0, float(p), a.order))
    if x0 <= 0.0:
        raise JetDomainError("pow", x0)
    return _series(a, _binomial_series(x0, float(p), a.order))


def reciprocal(a: Jet) -> Jet:
    if a.value == 0.0:
        raise JetDomainError("div", a.value)
    return _series(a, _binomial_series(a.value, -1.0, a.order))


def sqrt(a: Jet) -> Jet:
    if a.value <= 0.0:
        raise JetDomainError("sqrt", a.value)
    return _series(a, _binomial_series(a.value, 0.5, a.order))


def exp(a: Jet) -> Jet:
    e = math.exp(a.value)
    return _series(a, [e / math.factorial(k) for k in range(a.order + 1)])


def log(a: Jet) -> Jet:
    x0 = a.value
    if x0 <= 0.0:
        raise JetDomainError("log", x0)
    c = [math.log(x0)] + [(-1) ** (k + 1) / (k * x0 ** k) for k in range(1, a.order + 1)]
    return _series(a, c)


def sin(a: Jet) -> Jet:
    s, co = math.sin(a.value), math.cos(a.value)
    cyc = (s, co, -s, -co)
    return _series(a, [cyc[k % 4] / math.factorial(k) for k in range(a.order + 1)])


def cos(a: Jet) -> Jet:
    s, co = math.sin(a.value), math.cos(a.value)
    cyc = (co, -s, -co, s)
    return _series(a, [cyc[k % 4] / math.factorial(k) for k in range(a.order + 1)])


ELEMENTARY = {"sqrt": sqrt, "sin": sin, "cos": cos, "exp": exp, "log": log}


def jet_elementary(fn: str, a: Jet, exponent: float | None = None) -> Jet:
    if fn == "pow_const":
        if exponent is None:
            raise ValueError("pow_const needs an exponent")
        return pow_const(a, exponent)
    try:
        return ELEMENTARY[fn](a)
    except KeyError:
        raise ValueError(f"unknown elementary function {fn!r}") from None


# -- jet-valued arrays --------------------------------------------------------
def values(arr) -> np.ndarray:
    """Float array of the degree-0 entries of an object array of jets."""
    arr = np.asarray(arr, dtype=object)
    return np.vectorize(lambda j: j.value if isinstance(j, Jet) else float(j),
                        otypes=[float])(arr)


def jet_array(shape, fill: Jet) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        out[idx] = fill
    return out


def map_jets(fn: Callable[[Jet], Jet], arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(*arr.shape):
        out[idx] = fn(arr[idx])
    return out


def inv(mat) -> np.ndarray:
    """Inverse of a square jet-valued matrix.

    With ``M = M0 + E`` and ``E`` nilpotent to the jet order,
    ``M^-1 = sum_k (-M0^-1 E)^k M0^-1``.
    """
    mat = np.asarray(mat, dtype=object)
    m0 = values(mat)
    m0inv = np.linalg.inv(m0)
    order = next(j.order for j in mat.flat if isinstance(j, Jet))
    e = m0inv @ (mat - m0)
    term = np.eye(m0.shape[0]).astype(object)
    total = term
    for _ in range(order):
        term = -(e @ term)
        total = total + term
    return total @ m0inv
