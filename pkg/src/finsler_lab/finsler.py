"""Ambient Finsler objects at a point of the slit tangent bundle.

Everything here is derived from a single jet of ``F^2`` in the ``2n``
variables ``(x^1..x^n, y^1..y^n)``.  Index conventions for the arrays in
:class:`AmbientEval`:

* ``g[i, j]``, ``g_inv[i, j]``
* ``A[i, j, k]``  Cartan tensor ``(F/2) dg_ij/dy^k``
* ``dg_dx[i, j, k] = dg_ij/dx^k`` and ``dg_dy[i, j, k] = dg_ij/dy^k``
* ``N[i, j] = dG^i/dy^j``
* ``dN_dy[i, j, k] = dN^i_j/dy^k`` (the Berwald coefficients ``G^i_jk``)

Frames use ``delta/delta x^j = d/dx^j - N^i_j d/dy^i`` and
``delta y^i = dy^i + N^i_j dx^j``; with these signs the duality relations
``theta(X^H) = 0`` and ``theta(X^V) = X`` hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as E
from . import jet as J
from .errors import ConvexityError, DegenerateMetricError, MathDomainError

AMBIENT_ORDER = 4
EIG_THRESHOLD = 1e-10
COND_LIMIT = 1e12


def coordinate_names(n: int, base: str = "x", fiber: str = "y") -> tuple[list[str], list[str]]:
    return [f"{base}{i + 1}" for i in range(n)], [f"{fiber}{i + 1}" for i in range(n)]


@dataclass(frozen=True)
class MetricSpec:
    """Declarative Finsler structure on (a chart of) R^n.

    ``kind`` is one of ``euclidean``, ``riemannian``, ``randers``, ``custom``.
    Expressions are parsed against ``x1..xn`` (and ``y1..yn`` for custom)
    plus the names in ``parameters``.
    """

    dimension: int
    kind: str
    a: tuple | None = None
    b: tuple | None = None
    F: E.Expr | None = None
    parameters: Mapping[str, float] = field(default_factory=dict)
    source: Mapping = field(default_factory=dict, compare=False, repr=False)

    # -- constructors -------------------------------------------------------
    @classmethod
    def euclidean(cls, n: int) -> "MetricSpec":
        return cls(n, "euclidean", source={"kind": "euclidean", "dimension": n})

    @classmethod
    def riemannian(cls, a: Sequence[Sequence[str]], parameters=None) -> "MetricSpec":
        n = len(a)
        params = dict(parameters or {})
        allowed = coordinate_names(n)[0] + list(params)
        mat = _parse_matrix(a, n, allowed)
        return cls(n, "riemannian", a=mat, parameters=params,
                   source={"kind": "riemannian", "dimension": n, "a": [list(r) for r in a],
                           "parameters": params})

    @classmethod
    def randers(cls, b: Sequence[str], a: Sequence[Sequence[str]] | None = None,
                parameters=None) -> "MetricSpec":
        n = len(b)
        params = dict(parameters or {})
        if a is None:
            a = [["1" if i == j else "0" for j in range(n)] for i in range(n)]
        allowed = coordinate_names(n)[0] + list(params)
        mat = _parse_matrix(a, n, allowed)
        vec = tuple(E.parse(str(s), allowed) for s in b)
        return cls(n, "randers", a=mat, b=vec, parameters=params,
                   source={"kind": "randers", "dimension": n, "a": [list(r) for r in a],
                           "b": list(b), "parameters": params})

    @classmethod
    def custom(cls, F: str, n: int, parameters=None) -> "MetricSpec":
        params = dict(parameters or {})
        xs, ys = coordinate_names(n)
        return cls(n, "custom", F=E.parse(F, xs + ys + list(params)), parameters=params,
                   source={"kind": "custom", "dimension": n, "F": F, "parameters": params})

    # -- evaluation ---------------------------------------------------------
    def _bindings(self, xs) -> dict:
        names = coordinate_names(self.dimension)[0]
        bind = dict(self.parameters)
        bind.update(zip(names, xs))
        return bind

    def riemannian_part(self, xs) -> np.ndarray:
        """a_ij at ``xs`` (floats or jets) as an object array."""
        bind = self._bindings(xs)
        n = self.dimension
        if self.kind == "euclidean":
            return np.eye(n).astype(object)
        out = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                out[i, j] = E.evaluate(self.a[i][j], bind)
        return out

    def one_form(self, xs) -> np.ndarray:
        bind = self._bindings(xs)
        return np.array([E.evaluate(e, bind) for e in self.b], dtype=object)

    def finsler_squared(self, xs, ys):
        """F^2 at (xs, ys); works on floats and on jets."""
        n = self.dimension
        if self.kind == "euclidean":
            return sum(ys[i] * ys[i] for i in range(n))
        if self.kind == "riemannian":
            a = self.riemannian_part(xs)
            return sum(a[i, j] * ys[i] * ys[j] for i in range(n) for j in range(n))
        F = self.finsler_function(xs, ys)
        return F * F

    def finsler_function(self, xs, ys):
        n = self.dimension
        if self.kind in ("euclidean", "riemannian"):
            q = self.finsler_squared(xs, ys)
            return J.sqrt(q) if isinstance(q, J.Jet) else _float_sqrt(q)
        if self.kind == "randers":
            a = self.riemannian_part(xs)
            b = self.one_form(xs)
            q = sum(a[i, j] * ys[i] * ys[j] for i in range(n) for j in range(n))
            alpha = J.sqrt(q) if isinstance(q, J.Jet) else _float_sqrt(q)
            return alpha + sum(b[i] * ys[i] for i in range(n))
        bind = self._bindings(xs)
        bind.update(zip(coordinate_names(n)[1], ys))
        return E.evaluate(self.F, bind)

    def check_at(self, x: Sequence[float]) -> None:
        """Validate the structural conditions of the metric family at ``x``."""
        if self.kind not in ("riemannian", "randers"):
            return
        a = J.values(self.riemannian_part(list(x)))
        if np.max(np.abs(a - a.T)) > 1e-12:
            raise ConvexityError(f"riemannian part not symmetric at x={list(x)}")
        if np.linalg.eigvalsh(a).min() <= EIG_THRESHOLD:
            raise ConvexityError(f"riemannian part not positive definite at x={list(x)}")
        if self.kind == "randers":
            b = J.values(self.one_form(list(x)))
            nb = float(b @ np.linalg.solve(a, b))
            if nb >= 1.0:
                raise ConvexityError(f"randers one-form too long (|b|_a^2 = {nb:.6g} >= 1)")


def _float_sqrt(q: float) -> float:
    if q <= 0:
        raise MathDomainError(f"sqrt undefined at value {q!r}")
    return float(np.sqrt(q))


def _parse_matrix(a, n, allowed):
    if len(a) != n or any(len(r) != n for r in a):
        raise ValueError("riemannian part must be a square matrix")
    return tuple(tuple(E.parse(str(s), allowed) for s in row) for row in a)


@dataclass(frozen=True)
class TangentPoint:
    x: tuple
    y: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same length")
        if not any(self.y):
            raise MathDomainError("y = 0 is not in the slit tangent bundle")

    def scaled(self, lam: float) -> "TangentPoint":
        return TangentPoint(self.x, tuple(lam * v for v in self.y))


@dataclass
class AmbientEval:
    x: np.ndarray
    y: np.ndarray
    F: float
    g: np.ndarray
    g_inv: np.ndarray
    A: np.ndarray
    dg_dx: np.ndarray
    dg_dy: np.ndarray
    G: np.ndarray
    N: np.ndarray
    l: np.ndarray
    dN_dy: np.ndarray | None = None
    f2_jet: J.Jet | None = field(default=None, repr=False, compare=False)
    g_jet: np.ndarray | None = field(default=None, repr=False, compare=False)
    G_jet: list | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.y)

    def delta_g(self) -> np.ndarray:
        """delta g_ij / delta x^k = dg_ij/dx^k - N^m_k dg_ij/dy^m, indexed [i, j, k]."""
        return self.dg_dx - np.einsum("mk,ijm->ijk", self.N, self.dg_dy)


def ambient_eval(m: MetricSpec, p: TangentPoint, order: int = AMBIENT_ORDER) -> AmbientEval:
    """Evaluate the fundamental tensor, Cartan tensor, spray and nonlinear connection."""
    n = m.dimension
    if len(p.x) != n:
        raise ValueError(f"point has dimension {len(p.x)}, metric has {n}")
    m.check_at(p.x)
    lifted = J.lift_point(list(p.x) + list(p.y), order)
    f2 = m.finsler_squared(lifted[:n], lifted[n:])
    if not isinstance(f2, J.Jet):
        raise MathDomainError("F^2 does not depend on the coordinates")
    return ambient_from_f2(f2, p.x, p.y)


def ambient_from_f2(f2: J.Jet, x: Sequence[float], y: Sequence[float]) -> AmbientEval:
    """Assemble an :class:`AmbientEval` from a jet of F^2 in (x, y).

    The jet must have ``2n`` variables ordered ``x`` then ``y`` and order at
    least 3; order 4 additionally yields the Berwald coefficients.
    """
    n = len(y)
    order = f2.order
    if f2.num_vars != 2 * n or order < 3:
        raise ValueError("need a jet of order >= 3 in 2n variables")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    F2 = f2.value
    if not F2 > 0.0:
        raise MathDomainError(f"F must be positive on the slit bundle, got F^2 = {F2!r}")
    F = float(np.sqrt(F2))

    d_y = [J.derivative(f2, n + l) for l in range(n)]
    d_x = [J.truncate(J.derivative(f2, l), order - 2) for l in range(n)]
    gj = np.empty((n, n), dtype=object)
    d2xy = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            gj[i, j] = J.derivative(d_y[i], n + j) * 0.5
            d2xy[j, i] = J.derivative(d_y[i], j)  # [k, l] = F^2_{x^k y^l}
    g = J.values(gj)
    g = 0.5 * (g + g.T)
    _check_fundamental(g, x, y)
    ginv_j = J.inv(gj)

    ys = [J.lift_variable(y[l], n + l, 2 * n, order - 2) for l in range(n)]
    # G^i = 1/4 g^il (F^2_{x^k y^l} y^k - F^2_{x^l})
    rhs = [sum(d2xy[k, l] * ys[k] for k in range(n)) - d_x[l] for l in range(n)]
    Gj = [sum(ginv_j[i, l] * rhs[l] for l in range(n)) * 0.25 for i in range(n)]
    G = np.array([gi.value for gi in Gj])
    N = np.empty((n, n))
    dN_dy = np.empty((n, n, n)) if order >= 4 else None
    for i in range(n):
        for j in range(n):
            nij = J.derivative(Gj[i], n + j)
            N[i, j] = nij.value
            if dN_dy is not None:
                for k in range(n):
                    dN_dy[i, j, k] = J.derivative(nij, n + k).value

    dg_dx = np.empty((n, n, n))
    dg_dy = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                mu = [0] * (2 * n)
                mu[n + i] += 1
                mu[n + j] += 1
                mu[k] += 1
                dg_dx[i, j, k] = 0.5 * J.extract(f2, mu)
                mu[k] -= 1
                mu[n + k] += 1
                dg_dy[i, j, k] = 0.5 * J.extract(f2, mu)

    return AmbientEval(
        x=x, y=y, F=F, g=g, g_inv=J.values(ginv_j), A=0.5 * F * dg_dy,
        dg_dx=dg_dx, dg_dy=dg_dy, G=G, N=N, l=y / F, dN_dy=dN_dy, f2_jet=f2,
        g_jet=gj, G_jet=Gj,
    )


def _check_fundamental(g: np.ndarray, x, y) -> None:
    eig = np.linalg.eigvalsh(g)
    if eig.min() <= EIG_THRESHOLD:
        raise ConvexityError(
            f"fundamental tensor not positive definite at x={x.tolist()}, y={y.tolist()} "
            f"(min eigenvalue {eig.min():.3g})")
    if eig.max() / eig.min() > COND_LIMIT:
        raise DegenerateMetricError(f"fundamental tensor condition number {eig.max() / eig.min():.3g}")


def spray_homogeneity_check(m: MetricSpec, p: TangentPoint, lam: float) -> float:
    """Max deviation from the homogeneity degrees of F (1), g (0), G (2), N (1)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    a = ambient_eval(m, p, order=3)
    b = ambient_eval(m, p.scaled(lam), order=3)
    return float(max(
        abs(b.F - lam * a.F),
        np.max(np.abs(b.g - a.g)),
        np.max(np.abs(b.G - lam ** 2 * a.G)),
        np.max(np.abs(b.N - lam * a.N)),
    ))


@dataclass
class Frames:
    """Adapted frame and coframe in the (d/dx, d/dy) coordinate basis.

    ``horizontal[j]`` is delta/delta x^j, ``vertical[j]`` is F d/dy^j (each a
    2n-vector); ``dx[i]`` and ``delta_y[i]`` (= delta y^i / F) are covectors.
    """

    horizontal: np.ndarray
    vertical: np.ndarray
    dx: np.ndarray
    delta_y: np.ndarray

    def frame_matrix(self) -> np.ndarray:
        return np.vstack([self.horizontal, self.vertical]).T

    def coframe_matrix(self) -> np.ndarray:
        return np.vstack([self.dx, self.delta_y])


def adapted_frames(a: AmbientEval) -> Frames:
    n = a.dim
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return Frames(
        horizontal=np.hstack([eye, -a.N.T]),
        vertical=np.hstack([zero, a.F * eye]),
        dx=np.hstack([eye, zero]),
        delta_y=np.hstack([a.N, eye]) / a.F,
    )


def ehresmann_apply(a: AmbientEval, X) -> tuple[np.ndarray, np.ndarray]:
    """(pi_* X, theta(X)) for a tangent vector X of the slit bundle."""
    X = np.asarray(X, dtype=float)
    n = a.dim
    xh, xv = X[:n], X[n:]
    return xh.copy(), (xv + a.N @ xh) / a.F


def sasaki_inner(a: AmbientEval, X, Y) -> float:
    px, tx = ehresmann_apply(a, X)
    py, ty = ehresmann_apply(a, Y)
    return float(px @ a.g @ py + tx @ a.g @ ty)
