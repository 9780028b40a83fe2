"""Finite-difference oracle and the invariant-suite runner.

The oracle works on plain float callables and never touches jet code.  The
suite evaluates every applicable invariant over a scene's sample points and
returns a :class:`Report` that serializes to deterministic JSON.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .connections import ambient_connections
from .errors import FinslerLabError, SceneError
from .finsler import (MetricSpec, TangentPoint, adapted_frames, ambient_eval,
                      ehresmann_apply, spray_homogeneity_check)
from .submanifold import (ImmersionSpec, SubPoint, frame_identities, gauss_weingarten_residual,
                          hashiguchi_comparison, induce, projected_spray_derivatives,
                          restriction_identity)

FIBER_SCALES = (0.5, 1.0, 2.0)
HOMOGENEITY_LAMBDAS = (0.5, 2.0, 3.0)
DEFAULT_THREADS = 4
ORACLE_POINTS = 3
# higher derivatives lose more digits to cancellation, so they get wider steps
STEP_SCALE = {1: 3.0, 2: 10.0, 3: 30.0}

# 1-D central-difference stencils: offsets (in units of h) and weights, error O(h^2)
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


# -- oracle -----------------------------------------------------------------------
def _central(f, x: np.ndarray, mu: Sequence[int], h: np.ndarray) -> float:
    axes = [(i, k) for i, k in enumerate(mu) if k]
    total = 0.0
    for combo in itertools.product(*(zip(*_STENCILS[k]) for _, k in axes)):
        shift = np.zeros_like(x)
        w = 1.0
        for (i, k), (off, wt) in zip(axes, combo):
            shift[i] = off * h[i]
            w *= wt
        total += w * f(x + shift)
    denom = 1.0
    for i, k in axes:
        denom *= h[i] ** k
    return total / denom


def fd_oracle(f: Callable[[np.ndarray], float], point, multi_index: Sequence[int],
              h: float = 1e-3, levels: int = 2) -> float:
    """Partial derivative of ``f`` by central differences plus Richardson extrapolation.

    The step for coordinate ``i`` is ``h * STEP_SCALE[order] * max(1, |x_i|)``.
    Estimates at ``h, h/2, ..., h/2^levels`` are combined in a Richardson
    table, each column removing the next even power of ``h``.
    """
    x = np.asarray(point, dtype=float)
    mu = list(multi_index)
    if len(mu) != x.size:
        raise ValueError("multi-index length must match the point")
    if sum(mu) > 3 or min(mu, default=0) < 0:
        raise ValueError("fd_oracle supports total order <= 3")
    order = sum(mu)
    if order == 0:
        return float(f(x))
    step = h * STEP_SCALE[order] * np.maximum(1.0, np.abs(x))
    try:
        est = [_central(f, x, mu, step / 2 ** k) for k in range(levels + 1)]
    except (ValueError, ArithmeticError, FinslerLabError) as err:
        raise FinslerLabError(f"evaluation failed inside the stencil: {err}") from None
    for col in range(1, levels + 1):
        r = 4.0 ** col
        est = [(r * est[i + 1] - est[i]) / (r - 1.0) for i in range(len(est) - 1)]
    return est[0]


def f2_float(metric: MetricSpec) -> Callable[[np.ndarray], float]:
    """F^2 as a float function of the stacked (x, y) vector."""
    n = metric.dimension

    def f(z):
        return float(metric.finsler_squared([float(t) for t in z[:n]], [float(t) for t in z[n:]]))
    return f


@dataclass
class OracleAmbient:
    F: float
    g: np.ndarray
    A: np.ndarray
    dg_dx: np.ndarray
    G: np.ndarray
    N: np.ndarray


def oracle_ambient(metric: MetricSpec, p: TangentPoint, h: float = 1e-3) -> OracleAmbient:
    """g, A, dg/dx, G and N from finite-difference partials of F^2 only.

    N uses the product rule on the spray formula, so third partials of F^2
    suffice.
    """
    n = metric.dimension
    f = f2_float(metric)
    z = np.concatenate([p.x, p.y])

    def d(*idx):
        mu = [0] * (2 * n)
        for k in idx:
            mu[k] += 1
        return fd_oracle(f, z, mu, h)

    X = list(range(n))
    Y = [n + i for i in range(n)]
    F = float(np.sqrt(f(z)))
    g = np.array([[0.5 * d(Y[i], Y[j]) for j in X] for i in X])
    dg_dy = np.array([[[0.5 * d(Y[i], Y[j], Y[k]) for k in X] for j in X] for i in X])
    dg_dx = np.array([[[0.5 * d(Y[i], Y[j], X[k]) for k in X] for j in X] for i in X])
    f_x = np.array([d(X[l]) for l in X])
    f_xy = np.array([[d(X[k], Y[l]) for l in X] for k in X])          # [k, l]
    f_xyy = np.array([[[d(X[k], Y[l], Y[j]) for j in X] for l in X] for k in X])
    ginv = np.linalg.inv(g)
    y = np.asarray(p.y)
    rhs = f_xy.T @ y - f_x
    G = 0.25 * ginv @ rhs
    dginv = -np.einsum("ia,abj,bl->ilj", ginv, dg_dy, ginv)
    drhs = np.einsum("klj,k->lj", f_xyy, y) + f_xy.T - f_xy
    N = 0.25 * (np.einsum("ilj,l->ij", dginv, rhs) + ginv @ drhs)
    return OracleAmbient(F=F, g=g, A=0.5 * F * dg_dy, dg_dx=dg_dx, G=G, N=N)


def _fd_christoffel(metric: MetricSpec, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Levi-Civita symbols of a_ij(x), finite-differenced, layout [k, i, j]."""
    n = metric.dimension

    def a_at(xs):
        return np.array([[float(c) for c in row] for row in metric.riemannian_part(list(xs))])

    da = np.empty((n, n, n))
    for k in range(n):
        mu = [0] * n
        mu[k] = 1
        for i in range(n):
            for j in range(n):
                da[i, j, k] = fd_oracle(lambda z: a_at(z)[i, j], x, mu, h)
    low = 0.5 * (da + np.einsum("ikj->ijk", da) - np.einsum("jki->ijk", da))
    # low[i, j, k] = 1/2 (d_k a_ij + d_j a_ik - d_i a_jk) = Gamma_{i, jk}
    return np.einsum("li,ijk->ljk", np.linalg.inv(a_at(x)), low)


# -- scenes -----------------------------------------------------------------------
@dataclass
class Scene:
    name: str
    metric: MetricSpec
    immersion: ImmersionSpec | None
    sample_points: list
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    expected_nonzero: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sample_points:
            raise SceneError("scene needs at least one sample point")

    @property
    def is_riemannian(self) -> bool:
        return self.metric.kind in ("euclidean", "riemannian")


def random_points(rng: np.random.Generator, ranges: Sequence[Sequence[float]], count: int,
                  make) -> list:
    """Base points uniform in ``ranges``; fiber directions uniform on the sphere
    scaled cyclically by FIBER_SCALES."""
    lo = np.array([r[0] for r in ranges], dtype=float)
    hi = np.array([r[1] for r in ranges], dtype=float)
    out = []
    for k in range(count):
        base = lo + (hi - lo) * rng.random(lo.size)
        direction = rng.standard_normal(lo.size)
        direction /= np.linalg.norm(direction)
        out.append(make(base, FIBER_SCALES[k % len(FIBER_SCALES)] * direction))
    return out


# -- reporting --------------------------------------------------------------------
@dataclass
class CheckRecord:
    check: str
    anchor: str
    max_residual: float
    tolerance: float
    comparison: str          # "le": max residual <= tol; "gt": aggregate > tol
    passed: bool
    worst_point: int | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "check": self.check, "anchor": self.anchor,
            "max_residual": self.max_residual, "tolerance": self.tolerance,
            "comparison": self.comparison, "passed": self.passed,
            "worst_point": self.worst_point, "error": self.error,
        }


@dataclass
class Report:
    scene: str
    seed: int
    num_points: int
    records: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def record(self, name: str) -> CheckRecord:
        for r in self.records:
            if r.check == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "scene": self.scene, "seed": self.seed, "num_points": self.num_points,
            "status": "pass" if self.passed else "fail",
            "checks": [r.to_dict() for r in self.records],
        }


# name -> (anchor, default tolerance)
CHECKS = {
    "ambient.fundamental_symmetric": ("fundamental tensor is symmetric", 1e-10),
    "ambient.fundamental_inverse": ("g times its inverse is the identity", 1e-10),
    "ambient.fundamental_positive": ("fundamental tensor positive definite (min eigenvalue)", 0.0),
    "ambient.g_yy_is_F2": ("g(y, y) = F^2", 1e-10),
    "ambient.cartan_symmetric": ("Cartan tensor totally symmetric", 1e-8),
    "ambient.cartan_y_contraction": ("Cartan tensor annihilates y", 1e-8),
    "ambient.homogeneity": ("F, g, G, N homogeneity under y -> lambda y", 1e-9),
    "ambient.frame_coframe_duality": ("adapted coframe dual to adapted frame", 1e-10),
    "ambient.ehresmann_lifts": ("theta kills horizontal lifts, inverts vertical lifts", 1e-10),
    "ambient.sasaki_orthogonal": ("Sasaki metric splits horizontal and vertical", 1e-10),
    "ambient.oracle_agreement": ("g, A, dg/dx, G, N against finite differences (relative)", 1e-6),
    "connections.spray_compatibility": ("Chern horizontal coefficients reproduce 2G", 1e-8),
    "connections.chern_symmetric": ("Chern horizontal coefficients symmetric", 1e-10),
    "connections.vertical_is_cartan": ("vertical coefficients equal the raised Cartan tensor", 1e-10),
    "connections.landsberg_symmetric": ("Landsberg tensor totally symmetric", 1e-8),
    "connections.landsberg_y_contraction": ("Landsberg tensor annihilates y", 1e-8),
    "connections.riemannian_cartan_vanishes": ("Riemannian case: Cartan tensor vanishes", 1e-10),
    "connections.riemannian_levi_civita": ("Riemannian case: Hashiguchi = finite-difference Levi-Civita", 1e-8),
    "sub.frame_identities": ("orthonormal normal frame, inverse transition blocks, completeness", 1e-9),
    "sub.induced_metric_dual_path": ("pullback metric equals v-Hessian of induced F^2", 1e-9),
    "sub.intrinsic_koszul": ("Koszul-type contraction reproduces intrinsic Hashiguchi", 1e-8),
    "sub.nonlinear_deformation": ("intrinsic N = induced N + D / F", 1e-7),
    "sub.deformation_annihilates_v": ("D^a_b v^b = 0", 1e-8),
    "sub.gauss_weingarten_chern": ("Gauss/Weingarten reassembly, Chern", 1e-8),
    "sub.gauss_weingarten_hashiguchi": ("Gauss/Weingarten reassembly, Hashiguchi", 1e-8),
    "sub.restriction_tangential": ("tangential part of theta~ equals B theta", 1e-8),
    "sub.restriction_normal_part": ("normal part of theta~ equals N H du / F", 1e-8),
    "sub.projected_spray": ("intrinsic spray, N and Berwald from the projected ambient spray", 1e-8),
    "sub.hashiguchi_relation": ("induced vs intrinsic Hashiguchi through D", 1e-7),
    "sub.vertical_hashiguchi_equal": ("induced vertical Hashiguchi equals intrinsic", 1e-8),
    "sub.deformation_norm": ("max |D|", 1e-10),
    "sub.hashiguchi_gap": ("max |H - H*| between induced and intrinsic", 1e-8),
}
# checks that only make sense (as "le") for Riemannian ambients
RIEMANNIAN_ONLY = {"connections.riemannian_cartan_vanishes", "connections.riemannian_levi_civita",
                   "sub.deformation_norm", "sub.hashiguchi_gap"}


def _maxabs(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def _sym3(T) -> float:
    return max(_maxabs(T - np.einsum("ijk->jik", T)), _maxabs(T - np.einsum("ijk->ikj", T)))


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return _maxabs((a - b) / np.maximum(1.0, np.abs(b)))


def ambient_checks(metric: MetricSpec, p: TangentPoint, with_oracle: bool, riemannian: bool) -> dict:
    a = ambient_eval(metric, p)
    chern, lands, hashi = ambient_connections(a)
    n = a.dim
    y = a.y
    out = {
        "ambient.fundamental_symmetric": _maxabs(a.g - a.g.T),
        "ambient.fundamental_inverse": _maxabs(a.g @ a.g_inv - np.eye(n)),
        "ambient.fundamental_positive": float(np.linalg.eigvalsh(a.g).min()),
        "ambient.g_yy_is_F2": abs(float(y @ a.g @ y) - a.F ** 2),
        "ambient.cartan_symmetric": _sym3(a.A),
        "ambient.cartan_y_contraction": _maxabs(np.einsum("ijk,k->ij", a.A, y)),
        "ambient.homogeneity": max(spray_homogeneity_check(metric, p, lam) for lam in HOMOGENEITY_LAMBDAS),
        "connections.spray_compatibility": _maxabs(np.einsum("ljk,j,k->l", chern.horizontal, y, y) - 2 * a.G),
        "connections.chern_symmetric": _maxabs(chern.horizontal - np.einsum("kij->kji", chern.horizontal)),
        "connections.vertical_is_cartan": _maxabs(chern.vertical - np.einsum("ks,sij->kij", a.g_inv, a.A)),
        "connections.landsberg_symmetric": _sym3(lands.L),
        "connections.landsberg_y_contraction": _maxabs(np.einsum("ijk,k->ij", lands.L, y)),
    }
    fr = adapted_frames(a)
    out["ambient.frame_coframe_duality"] = _maxabs(fr.coframe_matrix() @ fr.frame_matrix() - np.eye(2 * n))
    lift = 0.0
    for j in range(n):
        pi_h, th_h = ehresmann_apply(a, fr.horizontal[j])
        pi_v, th_v = ehresmann_apply(a, fr.vertical[j])
        e = np.eye(n)[j]
        lift = max(lift, _maxabs(th_h), _maxabs(pi_h - e), _maxabs(pi_v), _maxabs(th_v - e))
    out["ambient.ehresmann_lifts"] = lift
    gs = np.array([[fr.horizontal[i] @ fr.dx.T @ a.g @ fr.dx @ fr.vertical[j]
                    + (fr.delta_y @ fr.horizontal[i]) @ a.g @ (fr.delta_y @ fr.vertical[j])
                    for j in range(n)] for i in range(n)])
    out["ambient.sasaki_orthogonal"] = _maxabs(gs)
    if with_oracle:
        o = oracle_ambient(metric, p)
        out["ambient.oracle_agreement"] = max(_rel(a.g, o.g), _rel(a.A, o.A), _rel(a.dg_dx, o.dg_dx),
                                              _rel(a.G, o.G), _rel(a.N, o.N))
    if riemannian:
        out["connections.riemannian_cartan_vanishes"] = _maxabs(a.A)
        out["connections.riemannian_levi_civita"] = (
            max(_maxabs(hashi.horizontal - _fd_christoffel(metric, a.x)), _maxabs(hashi.vertical))
            if metric.kind == "riemannian" else max(_maxabs(hashi.horizontal), _maxabs(hashi.vertical)))
    return out


def submanifold_checks(metric: MetricSpec, imm: ImmersionSpec, sp: SubPoint) -> tuple[dict, TangentPoint]:
    """Residuals at a sub point, plus the ambient point (x(u), B v) over it."""
    pkg = induce(metric, imm, sp)
    fp = pkg.frames
    v = np.asarray(sp.v)
    cmp = hashiguchi_comparison(pkg)
    restr = restriction_identity(fp, pkg.N_ind)
    G, Nn, Bw = projected_spray_derivatives(fp)
    sub = pkg.sub_eval
    res = {
        "sub.frame_identities": max(frame_identities(fp).values()),
        "sub.induced_metric_dual_path": _maxabs(fp.B.T @ fp.ambient.g @ fp.B - pkg.g_sub),
        "sub.intrinsic_koszul": pkg.koszul_residual,
        "sub.nonlinear_deformation": _maxabs(pkg.N_int - pkg.N_ind - pkg.D / pkg.F),
        "sub.deformation_annihilates_v": _maxabs(pkg.D @ v),
        "sub.gauss_weingarten_chern": gauss_weingarten_residual(fp, pkg.ambient_chern, pkg.N_ind),
        "sub.gauss_weingarten_hashiguchi": gauss_weingarten_residual(fp, pkg.ambient_hash, pkg.N_ind),
        "sub.restriction_tangential": restr["tangential"],
        "sub.restriction_normal_part": restr["normal_prediction"],
        "sub.projected_spray": max(_maxabs(G - sub.G), _maxabs(Nn - sub.N), _maxabs(Bw - sub.dN_dy)),
        "sub.hashiguchi_relation": cmp["inds_residual"],
        "sub.vertical_hashiguchi_equal": cmp["h_minus_hstar"],
        "sub.deformation_norm": cmp["D_norm"],
        "sub.hashiguchi_gap": cmp["H_minus_Hstar"],
    }
    return res, TangentPoint(fp.ambient.x, fp.ambient.y)


def thread_count() -> int:
    raw = os.environ.get("FINSLER_LAB_THREADS")
    if raw is None:
        return min(DEFAULT_THREADS, os.cpu_count() or 1)
    try:
        return max(1, int(raw))
    except ValueError:
        raise SceneError(f"FINSLER_LAB_THREADS must be a positive integer, got {raw!r}") from None


def _point_task(scene: Scene, idx: int, point) -> dict:
    """All residuals at one sample point; a crash becomes an ``error`` entry."""
    try:
        if scene.immersion is not None:
            res, amb_point = submanifold_checks(scene.metric, scene.immersion, point)
        else:
            res, amb_point = {}, point
        res.update(ambient_checks(scene.metric, amb_point, idx < ORACLE_POINTS, scene.is_riemannian))
        return res
    except Exception as err:  # noqa: BLE001 - checks must not abort the suite
        return {"__error__": f"{type(err).__name__}: {err}"}


def _applicable(scene: Scene) -> list[str]:
    names = []
    for name in CHECKS:
        if name.startswith("sub.") and scene.immersion is None:
            continue
        if name in RIEMANNIAN_ONLY and not scene.is_riemannian and name not in scene.expected_nonzero:
            continue
        names.append(name)
    return sorted(names)


def run_suite(scene: Scene, threads: int | None = None) -> Report:
    """Run every applicable check at every sample point.

    Deterministic for a given scene: per-point work may run in threads, but
    results are collected by point index and records sorted by check name.
    """
    workers = threads or thread_count()
    pts = list(scene.sample_points)
    if workers > 1 and len(pts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda ip: _point_task(scene, *ip), enumerate(pts)))
    else:
        results = [_point_task(scene, i, p) for i, p in enumerate(pts)]

    records = []
    for name in _applicable(scene):
        anchor, default_tol = CHECKS[name]
        if name == "ambient.fundamental_positive":
            # smallest eigenvalue over all points must stay positive
            comparison, tol, use_max = "gt", float(scene.tolerances.get(name, default_tol)), False
        elif name in scene.expected_nonzero:
            # the scene must exhibit the effect: largest value above the threshold
            comparison, tol, use_max = "gt", float(scene.expected_nonzero[name]), True
        else:
            comparison, tol, use_max = "le", float(scene.tolerances.get(name, default_tol)), True
        agg, agg_idx, error = None, None, None
        for idx, res in enumerate(results):
            if "__error__" in res:
                error = error or f"point {idx}: {res['__error__']}"
                continue
            if name not in res:
                continue
            r = res[name]
            if not np.isfinite(r):
                agg, agg_idx = r, idx
                break
            if agg is None or (r > agg if use_max else r < agg):
                agg, agg_idx = r, idx
        if agg is None:
            if error is None:
                continue
            agg, passed = float("nan"), False
        else:
            ok = agg <= tol if comparison == "le" else agg > tol
            passed = bool(ok and np.isfinite(agg) and error is None)
        records.append(CheckRecord(name, anchor, float(agg), tol, comparison, passed, agg_idx, error))
    return Report(scene.name, scene.seed, len(pts), records)
