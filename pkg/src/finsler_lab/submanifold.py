"""Induced geometry of a Finsler submanifold x = x(u) on the pulled-back bundle.

Index ranges: ``i, j, k`` ambient (size ``n_total``), ``alpha, beta, lam``
tangential (size ``m``), ``a, b`` normal (size ``n = n_total - m``).
Array layouts:

* ``B[i, alpha]``, ``B2[i, alpha, beta]``, ``B0[i, alpha] = B2[i, alpha, beta] v^beta``
* ``Nframe[i, a]``, ``Btilde[alpha, i]``, ``Ntilde[a, i]``, ``H[a, lam]``
* ``D[alpha, beta]`` is ``D^alpha_beta``
* connection-like arrays carry the output index first: ``horizontal[lam, alpha, beta]``
  is the coefficient of ``nabla_{delta/delta u^beta} d/du^alpha``
* ``S_h[a, alpha, beta]``, ``A_h[lam, a, alpha]``, ``normal_h[b, a, alpha]``

The normal frame is not canonical.  It is built by Gram-Schmidt in the
ambient fundamental tensor, seeded from the coordinate axes with the largest
residual after projecting out span(B), processed in index order.  Anything
carrying a normal index depends on that choice; every quantity compared
across code paths is frame independent.

Along the submanifold ``delta/delta u^alpha = B^k_alpha delta/delta x^k +
(N H)^k_alpha d/dy^k``.  In the unit-vertical frame ``F d/dy`` the normal
part has coefficient ``H / F``, so every ``H`` term in the Gauss/Weingarten
coefficients and in the restricted Landsberg tensor carries ``1/F``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as E
from . import jet as J
from .connections import ConnectionCoeffs, LandsbergEval, ambient_connections, koszul_hashiguchi
from .errors import FinslerLabError, MathDomainError, RankDeficiencyError
from .finsler import AmbientEval, MetricSpec, TangentPoint, ambient_eval, ambient_from_f2, ehresmann_apply

IMMERSION_ORDER = 5   # x(u); B then carries order 4
INDUCED_ORDER = 4     # induced F^2, enough for Berwald coefficients
FRAME_ORDER = 2       # frame fields as functions of (u, v)
RANK_THRESHOLD = 1e-8
GS_THRESHOLD = 1e-10
TRANSITION_COND = 1e12
RECONCILE_TOL = 1e-9
KOSZUL_TOL = 1e-8


class CrossCheckError(FinslerLabError):
    """Two computation paths that must agree did not."""


@dataclass(frozen=True)
class ImmersionSpec:
    m: int
    n_total: int
    components: tuple
    parameters: Mapping[str, float] = field(default_factory=dict)
    source: Mapping = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_strings(cls, components: Sequence[str], m: int, parameters=None) -> "ImmersionSpec":
        params = {k: float(v) for k, v in (parameters or {}).items()}
        names = [f"u{a + 1}" for a in range(m)]
        comps = tuple(E.parse(c, names + list(params)) for c in components)
        if len(comps) <= m:
            raise ValueError("an immersion needs more ambient components than parameters")
        return cls(m, len(comps), comps, params,
                   source={"dimension": m, "components": list(components), "parameters": params})

    @property
    def codim(self) -> int:
        return self.n_total - self.m

    def evaluate(self, us) -> list:
        bind = dict(self.parameters)
        bind.update({f"u{a + 1}": u for a, u in enumerate(us)})
        return [E.evaluate(c, bind) for c in self.components]


@dataclass(frozen=True)
class SubPoint:
    u: tuple
    v: tuple

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(float(t) for t in self.u))
        object.__setattr__(self, "v", tuple(float(t) for t in self.v))
        if len(self.u) != len(self.v):
            raise ValueError("u and v must have the same length")
        if not any(self.v):
            raise MathDomainError("v = 0 is not in the slit tangent bundle")


@dataclass
class FramePackage:
    B: np.ndarray
    B2: np.ndarray
    B0: np.ndarray
    Nframe: np.ndarray
    Btilde: np.ndarray
    Ntilde: np.ndarray
    H: np.ndarray
    seed_axes: tuple
    ambient: AmbientEval = field(repr=False)
    # jets in the 2m variables (u, v) at FRAME_ORDER
    x_jet: list = field(repr=False, default=None)
    y_jet: list = field(repr=False, default=None)
    b2vv_jet: list = field(repr=False, default=None)
    B_jet: np.ndarray = field(repr=False, default=None)
    N_jet: np.ndarray = field(repr=False, default=None)
    Btilde_jet: np.ndarray = field(repr=False, default=None)
    induced_f2: J.Jet = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def codim(self) -> int:
        return self.Nframe.shape[1]


def _check_rank(B: np.ndarray) -> None:
    sv = np.linalg.svd(B, compute_uv=False)
    if sv.min() < RANK_THRESHOLD:
        raise RankDeficiencyError(f"immersion rank deficient (smallest singular value {sv.min():.3g})")


def _scalar_value(s) -> float:
    return s.value if isinstance(s, J.Jet) else float(s)


def _scale(vec: np.ndarray, s) -> np.ndarray:
    # Jet opts out of numpy broadcasting, so scale an object vector by hand
    return np.array([c * s for c in vec], dtype=object)


def normal_frame(Bj: np.ndarray, gtj: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Orthonormal frame (in gtj) of the gtj-orthogonal complement of span(Bj).

    Works on object arrays of jets, so the frame's derivatives are exact.
    Returns the frame and the seed axes.
    """
    N, m = Bj.shape
    n = N - m
    gsub = Bj.T @ gtj @ Bj
    resid = np.eye(N).astype(object) - Bj @ J.inv(gsub) @ (Bj.T @ gtj)
    g0 = J.values(gtj)
    r0 = J.values(resid)
    norms = np.sqrt(np.maximum(np.einsum("ik,ij,jk->k", r0, g0, r0), 0.0))
    ranked = sorted(range(N), key=lambda k: (-norms[k], k))
    seeds = tuple(sorted(ranked[:n]))
    cols = []
    for k in seeds:
        w = resid[:, k]
        for e in cols:
            w = w - _scale(e, e @ gtj @ w)
        nn = w @ gtj @ w
        if np.sqrt(max(_scalar_value(nn), 0.0)) < GS_THRESHOLD:
            raise RankDeficiencyError(f"Gram-Schmidt breakdown on seed axis {k}")
        cols.append(_scale(w, J.pow_const(nn, -0.5)))
    out = np.empty((N, n), dtype=object)
    for a, c in enumerate(cols):
        out[:, a] = c
    return out, seeds


def _compose_array(outer: np.ndarray, inner: list) -> np.ndarray:
    return J.map_jets(lambda o: J.compose(o, inner), outer)


def frame_package(metric: MetricSpec, imm: ImmersionSpec, sp: SubPoint) -> FramePackage:
    m, N = imm.m, imm.n_total
    if metric.dimension != N:
        raise ValueError(f"immersion lands in R^{N}, metric lives on R^{metric.dimension}")
    if len(sp.u) != m:
        raise ValueError(f"sub point has dimension {len(sp.u)}, immersion has {m}")
    uv = list(sp.u) + list(sp.v)
    w5 = J.lift_point(uv, IMMERSION_ORDER)
    x5 = [xi if isinstance(xi, J.Jet) else w5[0].like(float(xi)) for xi in imm.evaluate(w5[:m])]
    B4 = np.array([[J.derivative(xi, a) for a in range(m)] for xi in x5], dtype=object)
    B = J.values(B4)
    _check_rank(B)
    B2j = [[[J.derivative(B4[i, a], b) for b in range(m)] for a in range(m)] for i in range(N)]
    B2 = np.array([[[b.value for b in row] for row in mat] for mat in B2j])
    v = np.array(sp.v)
    B0 = np.einsum("iab,b->ia", B2, v)

    # induced F^2 as a jet in (u, v)
    w4 = J.lift_point(uv, INDUCED_ORDER)
    x4 = [J.truncate(xi, INDUCED_ORDER) for xi in x5]
    y4 = [sum(B4[i, a] * w4[m + a] for a in range(m)) for i in range(N)]
    induced_f2 = metric.finsler_squared(x4, y4)

    x = np.array([xi.value for xi in x5])
    amb = ambient_eval(metric, TangentPoint(x, B @ v))

    # frame fields as jets in (u, v)
    w3 = J.lift_point(uv, 3)
    b2vv = [J.truncate(sum(B2j[i][a][b] * w3[m + a] * w3[m + b]
                           for a in range(m) for b in range(m)), FRAME_ORDER) for i in range(N)]
    xr = [J.truncate(xi, FRAME_ORDER) for xi in x4]
    yr = [J.truncate(yi, FRAME_ORDER) for yi in y4]
    Bj = J.map_jets(lambda b: J.truncate(b, FRAME_ORDER), B4)
    gtj = _compose_array(amb.g_jet, xr + yr)
    Nj, seeds = normal_frame(Bj, gtj)
    T = np.hstack([Bj, Nj])
    if np.linalg.cond(J.values(T)) > TRANSITION_COND:
        raise RankDeficiencyError("transition matrix [B | N] is singular")
    Tinv = J.inv(T)
    Nframe = J.values(Nj)
    Btilde = J.values(Tinv[:m, :])
    Ntilde = J.values(Tinv[m:, :])
    H = Ntilde @ (B0 + amb.N @ B)
    return FramePackage(
        B=B, B2=B2, B0=B0, Nframe=Nframe, Btilde=Btilde, Ntilde=Ntilde, H=H,
        seed_axes=seeds, ambient=amb, x_jet=xr, y_jet=yr, b2vv_jet=b2vv,
        B_jet=Bj, N_jet=Nj, Btilde_jet=Tinv[:m, :], induced_f2=induced_f2,
    )


def frame_identities(fp: FramePackage) -> dict[str, float]:
    """Max-abs residuals of the orthonormality, duality and completeness relations."""
    g = fp.ambient.g
    m, n = fp.m, fp.codim
    N = fp.B.shape[0]
    return {
        "g(B, N) = 0": float(np.max(np.abs(fp.B.T @ g @ fp.Nframe))),
        "g(N, N) = I": float(np.max(np.abs(fp.Nframe.T @ g @ fp.Nframe - np.eye(n)))),
        "Btilde B = I": float(np.max(np.abs(fp.Btilde @ fp.B - np.eye(m)))),
        "Btilde N = 0": float(np.max(np.abs(fp.Btilde @ fp.Nframe))),
        "Ntilde B = 0": float(np.max(np.abs(fp.Ntilde @ fp.B))),
        "Ntilde N = I": float(np.max(np.abs(fp.Ntilde @ fp.Nframe - np.eye(n)))),
        "completeness": float(np.max(np.abs(fp.B @ fp.Btilde + fp.Nframe @ fp.Ntilde - np.eye(N)))),
    }


def induced_metric_and_F(fp: FramePackage, sp: SubPoint) -> tuple[float, np.ndarray, AmbientEval]:
    """Induced F and g_ab; the v-Hessian path is returned after checking it against the pullback."""
    sub = ambient_from_f2(fp.induced_f2, sp.u, sp.v)
    pull = fp.B.T @ fp.ambient.g @ fp.B
    gap = float(np.max(np.abs(pull - sub.g)))
    if gap > RECONCILE_TOL * max(1.0, float(np.max(np.abs(pull)))):
        raise CrossCheckError(f"induced metric paths disagree by {gap:.3g}")
    return sub.F, sub.g, sub


def induced_nonlinear(fp: FramePackage, ambient: AmbientEval | None = None) -> np.ndarray:
    amb = ambient or fp.ambient
    return fp.Btilde @ (fp.B0 + amb.N @ fp.B)


def intrinsic_nonlinear(sub: AmbientEval) -> np.ndarray:
    return sub.N.copy()


def mixed_cartan(fp: FramePackage) -> np.ndarray:
    """A_{lam beta a} = A~_ijk B^i_lam B^j_beta N^k_a."""
    return np.einsum("ijk,il,jb,ka->lba", fp.ambient.A, fp.B, fp.B, fp.Nframe)


def deformation_tensor(fp: FramePackage, sub: AmbientEval, sp: SubPoint) -> np.ndarray:
    """D^alpha_beta = H^a_lam v^lam g^{alpha mu} A_{mu beta a}."""
    raised = np.einsum("am,mbc->abc", sub.g_inv, mixed_cartan(fp))
    return np.einsum("abc,c->ab", raised, fp.H @ np.asarray(sp.v))


def projected_spray(fp: FramePackage) -> list:
    """Jets in (u, v) of 1/2 B~^lam_j (B^j_ab v^a v^b + 2 G~^j(x(u), B v)).

    This is the spray of the induced structure: its first v-derivatives give
    the intrinsic nonlinear connection, its second the intrinsic Berwald
    coefficients.
    """
    Gt = [J.compose(gj, fp.x_jet + fp.y_jet) for gj in fp.ambient.G_jet]
    W = [fp.b2vv_jet[j] + 2.0 * Gt[j] for j in range(len(Gt))]
    return [0.5 * sum(fp.Btilde_jet[lam, j] * W[j] for j in range(len(W))) for lam in range(fp.m)]


def projected_spray_derivatives(fp: FramePackage) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(G, dG/dv, d^2G/dv dv) of the projected spray; layouts [lam], [lam, b], [lam, a, b]."""
    m = fp.m
    sj = projected_spray(fp)
    G = np.array([s.value for s in sj])
    Nn = np.empty((m, m))
    Bw = np.empty((m, m, m))
    for lam in range(m):
        for b in range(m):
            d = J.derivative(sj[lam], m + b)
            Nn[lam, b] = d.value
            for a in range(m):
                Bw[lam, a, b] = J.derivative(d, m + a).value
    return G, Nn, Bw


@dataclass
class InducedConnection:
    conn: ConnectionCoeffs
    normal_h: np.ndarray
    normal_v: np.ndarray
    S_h: np.ndarray
    S_v: np.ndarray
    A_h: np.ndarray
    A_v: np.ndarray


def normal_frame_derivatives(fp: FramePackage) -> tuple[np.ndarray, np.ndarray]:
    """(dN^i_a/du^alpha, dN^i_a/dv^alpha), both stored [i, a, alpha]."""
    m = fp.m
    N, n = fp.N_jet.shape
    du = np.empty((N, n, m))
    dv = np.empty((N, n, m))
    for i in range(N):
        for a in range(n):
            g = J.gradient(fp.N_jet[i, a])
            du[i, a] = g[:m]
            dv[i, a] = g[m:]
    return du, dv


def induced_connection(fp: FramePackage, conn: ConnectionCoeffs,
                       N_ind: np.ndarray | None = None) -> InducedConnection:
    """Gauss/Weingarten split of an ambient pullback connection along the submanifold."""
    F = fp.ambient.F
    if N_ind is None:
        N_ind = induced_nonlinear(fp)
    Gh, Gv = conn.horizontal, conn.vertical
    B, Nf, H = fp.B, fp.Nframe, fp.H
    P = (fp.B2
         + np.einsum("ijk,ja,kb->iab", Gh, B, B)
         + np.einsum("ijk,ja,kc,cb->iab", Gv, B, Nf, H) / F)
    V = np.einsum("ijk,ja,kb->iab", Gv, B, B)
    du, dv = normal_frame_derivatives(fp)
    delta_N = du - np.einsum("ta,ibt->iba", N_ind, dv)
    Q = (delta_N
         + np.einsum("ijk,ja,kb->iab", Gh, Nf, B)
         + np.einsum("ijk,ja,kc,cb->iab", Gv, Nf, Nf, H) / F)
    R = F * dv + np.einsum("ijk,ja,kb->iab", Gv, Nf, B)
    Bt, Nt = fp.Btilde, fp.Ntilde
    return InducedConnection(
        conn=ConnectionCoeffs(np.einsum("li,iab->lab", Bt, P),
                              np.einsum("li,iab->lab", Bt, V), f"induced_{conn.kind}"),
        normal_h=np.einsum("bi,iac->bac", Nt, Q),
        normal_v=np.einsum("bi,iac->bac", Nt, R),
        S_h=np.einsum("ci,iab->cab", Nt, P),
        S_v=np.einsum("ci,iab->cab", Nt, V),
        A_h=-np.einsum("li,iac->lac", Bt, Q),
        A_v=-np.einsum("li,iac->lac", Bt, R),
    )


def induced_hashiguchi(fp: FramePackage, ambient_hash: ConnectionCoeffs) -> ConnectionCoeffs:
    """(B_ab + B B H~) and B B h~, both projected by B~."""
    if ambient_hash.kind != "hashiguchi":
        raise ValueError(f"expected hashiguchi coefficients, got {ambient_hash.kind!r}")
    B, Bt = fp.B, fp.Btilde
    horiz = np.einsum("lk,kab->lab", Bt,
                      fp.B2 + np.einsum("kij,ia,jb->kab", ambient_hash.horizontal, B, B))
    vert = np.einsum("lk,kij,ia,jb->lab", Bt, ambient_hash.vertical, B, B)
    return ConnectionCoeffs(horiz, vert, "induced_hashiguchi")


def restricted_landsberg(fp: FramePackage, L: LandsbergEval) -> np.ndarray:
    """Lbar_{ij alpha} = B^k_alpha L~_ijk - (H^a_alpha / F) N^k_a A~_ijk."""
    amb = fp.ambient
    return (np.einsum("ijk,ka->ija", L.L, fp.B)
            - np.einsum("ijk,kc,ca->ija", amb.A, fp.Nframe, fp.H) / amb.F)


def intrinsic_pipeline(sub: AmbientEval) -> tuple[ConnectionCoeffs, LandsbergEval, ConnectionCoeffs, float]:
    """Chern, Landsberg and Hashiguchi data of the induced structure.

    The last value is the max-abs gap between the Koszul-type contraction
    1/2 g^{mu lam}(delta g + delta g - delta g + 2 L) and the pipeline's
    Hashiguchi horizontal coefficients.
    """
    chern, lands, hashi = ambient_connections(sub)
    resid = float(np.max(np.abs(koszul_hashiguchi(sub, lands) - hashi.horizontal)))
    return chern, lands, hashi, resid


def intrinsic_hashiguchi(sub: AmbientEval) -> ConnectionCoeffs:
    _, _, hashi, resid = intrinsic_pipeline(sub)
    if resid > KOSZUL_TOL:
        raise CrossCheckError(f"intrinsic Hashiguchi cross-check failed (residual {resid:.3g})")
    return hashi


def inds_residual(hash_ind: ConnectionCoeffs, hash_int: ConnectionCoeffs, D: np.ndarray) -> np.ndarray:
    """H - [H* + D^t_a h_{t b} + D^t_b h_{t a} - D^mu_e h^e_{ab}] with h = B~ h~ B B."""
    hv = hash_ind.vertical
    pred = (hash_int.horizontal
            + np.einsum("ta,mtb->mab", D, hv)
            + np.einsum("tb,mta->mab", D, hv)
            - np.einsum("me,eab->mab", D, hv))
    return hash_ind.horizontal - pred


# -- full package ---------------------------------------------------------------
@dataclass
class InducedPackage:
    point: SubPoint
    frames: FramePackage = field(repr=False)
    sub_eval: AmbientEval = field(repr=False)
    F: float
    g_sub: np.ndarray
    N_ind: np.ndarray
    N_int: np.ndarray
    D: np.ndarray
    conn_ind: ConnectionCoeffs
    normal_h: np.ndarray
    normal_v: np.ndarray
    S_h: np.ndarray
    S_v: np.ndarray
    A_h: np.ndarray
    A_v: np.ndarray
    hash_ind: ConnectionCoeffs
    hash_int: ConnectionCoeffs
    L_restricted: np.ndarray
    koszul_residual: float
    ambient_chern: ConnectionCoeffs = field(repr=False)
    ambient_hash: ConnectionCoeffs = field(repr=False)
    ambient_landsberg: LandsbergEval = field(repr=False)


def induce(metric: MetricSpec, imm: ImmersionSpec, sp: SubPoint) -> InducedPackage:
    fp = frame_package(metric, imm, sp)
    F, g_sub, sub = induced_metric_and_F(fp, sp)
    chern, lands, hashi = ambient_connections(fp.ambient)
    N_ind = induced_nonlinear(fp)
    ic = induced_connection(fp, chern, N_ind)
    _, _, hash_int, kres = intrinsic_pipeline(sub)
    if kres > KOSZUL_TOL:
        raise CrossCheckError(f"intrinsic Hashiguchi cross-check failed (residual {kres:.3g})")
    return InducedPackage(
        point=sp, frames=fp, sub_eval=sub, F=F, g_sub=g_sub,
        N_ind=N_ind, N_int=intrinsic_nonlinear(sub), D=deformation_tensor(fp, sub, sp),
        conn_ind=ic.conn, normal_h=ic.normal_h, normal_v=ic.normal_v,
        S_h=ic.S_h, S_v=ic.S_v, A_h=ic.A_h, A_v=ic.A_v,
        hash_ind=induced_hashiguchi(fp, hashi), hash_int=hash_int,
        L_restricted=restricted_landsberg(fp, lands), koszul_residual=kres,
        ambient_chern=chern, ambient_hash=hashi, ambient_landsberg=lands,
    )


def hashiguchi_comparison(pkg: InducedPackage) -> dict[str, float]:
    return {
        "inds_residual": float(np.max(np.abs(inds_residual(pkg.hash_ind, pkg.hash_int, pkg.D)))),
        "D_norm": float(np.max(np.abs(pkg.D))),
        "H_minus_Hstar": float(np.max(np.abs(pkg.hash_ind.horizontal - pkg.hash_int.horizontal))),
        "h_minus_hstar": float(np.max(np.abs(pkg.hash_ind.vertical - pkg.hash_int.vertical))),
    }


# -- checks assembled from independent pieces -------------------------------------
def pushforward(fp: FramePackage, du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """Image in (d/dx, d/dy) coordinates of the vector du d/du + dv d/dv of TM_0.

    Reads dx/du and dy/du, dy/dv straight off the (u, v) jets of x and y.
    """
    m = fp.m
    jx = np.array([J.gradient(xi)[:m] for xi in fp.x_jet])
    jy = np.array([J.gradient(yi) for yi in fp.y_jet])
    return np.concatenate([jx @ du, jy[:, :m] @ du + jy[:, m:] @ dv])


def restriction_identity(fp: FramePackage, N_sub: np.ndarray | None = None) -> dict[str, float]:
    """Compare theta~ = delta y / F~ with B delta v / F on the coordinate vectors of TM_0.

    Reports the full residual, its tangential part (B~ applied) and the gap
    between the normal part and the prediction N H du / F.
    """
    m = fp.m
    amb = fp.ambient
    if N_sub is None:
        N_sub = induced_nonlinear(fp)
    full = tang = normal = 0.0
    eye = np.eye(m)
    for k in range(2 * m):
        du = eye[k] if k < m else np.zeros(m)
        dv = np.zeros(m) if k < m else eye[k - m]
        _, theta_amb = ehresmann_apply(amb, pushforward(fp, du, dv))
        theta_sub = (dv + N_sub @ du) / amb.F
        diff = theta_amb - fp.B @ theta_sub
        full = max(full, float(np.max(np.abs(diff))))
        tang = max(tang, float(np.max(np.abs(fp.Btilde @ diff))))
        normal = max(normal, float(np.max(np.abs(diff - fp.Nframe @ fp.H @ du / amb.F))))
    return {"full": full, "tangential": tang, "normal_prediction": normal}


def _ambient_derivative(fp: FramePackage, conn: ConnectionCoeffs, section: np.ndarray,
                        grad: np.ndarray, du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """nabla~_X s for X = du d/du + dv d/dv, with grad[i, :] the (u, v) gradient of s^i."""
    pi_x, theta_x = ehresmann_apply(fp.ambient, pushforward(fp, du, dv))
    return (grad @ np.concatenate([du, dv])
            + np.einsum("ijk,j,k->i", conn.horizontal, section, pi_x)
            + np.einsum("ijk,j,k->i", conn.vertical, section, theta_x))


def gauss_weingarten_residual(fp: FramePackage, conn: ConnectionCoeffs,
                              N_sub: np.ndarray | None = None) -> float:
    """Max gap between the ambient covariant derivative of B_alpha and N_a
    along delta/delta u and F d/dv, and its reassembly from the induced,
    second-fundamental-form, normal and shape-operator coefficients."""
    m, n = fp.m, fp.codim
    F = fp.ambient.F
    if N_sub is None:
        N_sub = induced_nonlinear(fp)
    ic = induced_connection(fp, conn, N_sub)
    N = fp.B.shape[0]
    gradB = np.array([[J.gradient(fp.B_jet[i, a]) for a in range(m)] for i in range(N)])
    gradN = np.array([[J.gradient(fp.N_jet[i, a]) for a in range(n)] for i in range(N)])
    worst = 0.0
    eye = np.eye(m)
    for b in range(m):
        for kind, du, dv in (("h", eye[b], -N_sub[:, b]), ("v", np.zeros(m), F * eye[b])):
            tang = ic.conn.horizontal if kind == "h" else ic.conn.vertical
            sff = ic.S_h if kind == "h" else ic.S_v
            shape = ic.A_h if kind == "h" else ic.A_v
            nrm = ic.normal_h if kind == "h" else ic.normal_v
            for a in range(m):
                lhs = _ambient_derivative(fp, conn, fp.B[:, a], gradB[:, a, :], du, dv)
                rhs = fp.B @ tang[:, a, b] + fp.Nframe @ sff[:, a, b]
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
            for a in range(n):
                lhs = _ambient_derivative(fp, conn, fp.Nframe[:, a], gradN[:, a, :], du, dv)
                rhs = -fp.B @ shape[:, a, b] + fp.Nframe @ nrm[:, a, b]
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst
