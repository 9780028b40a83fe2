"""Chern, Landsberg and Hashiguchi data on the pulled-back bundle.

Coefficient arrays are indexed ``[k, i, j]`` with the output index first:
``nabla_{delta/delta x^j} d/dx^i = horizontal[k, i, j] d/dx^k`` and likewise
for ``vertical`` along ``F d/dy^j``.  All connections here are symmetric in
``(i, j)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .finsler import AmbientEval


@dataclass
class ConnectionCoeffs:
    horizontal: np.ndarray
    vertical: np.ndarray
    kind: str

    @property
    def dim(self) -> int:
        return self.horizontal.shape[0]


@dataclass
class LandsbergEval:
    L: np.ndarray         # L_ijk
    L_raised: np.ndarray  # L^k_ij, stored [k, i, j]


def christoffel_lowered(dg: np.ndarray) -> np.ndarray:
    """Gamma_{s j k} = 1/2 (d_k g_sj - d_s g_jk + d_j g_ks) from ``dg[i, j, k] = d_k g_ij``."""
    return 0.5 * (
        np.einsum("sjk->sjk", dg)
        - np.einsum("jks->sjk", dg)
        + np.einsum("ksj->sjk", dg)
    )


def chern_coefficients(a: AmbientEval) -> ConnectionCoeffs:
    """Horizontal part from delta-derivatives of g, vertical part = raised Cartan tensor."""
    low = christoffel_lowered(a.delta_g())
    horizontal = np.einsum("ls,sjk->ljk", a.g_inv, low)
    vertical = np.einsum("ks,sij->kij", a.g_inv, a.A)
    return ConnectionCoeffs(horizontal, vertical, "chern")


def berwald_coefficients(a: AmbientEval) -> np.ndarray:
    """G^k_ij = d^2 G^k / dy^i dy^j, stored [k, i, j]."""
    if a.dN_dy is None:
        raise ValueError("Berwald coefficients need an order-4 ambient evaluation")
    return a.dN_dy.copy()


def landsberg_tensor(a: AmbientEval) -> LandsbergEval:
    """L_ijk = -1/2 g_ij;k, the Berwald horizontal covariant derivative of g."""
    gb = berwald_coefficients(a)
    dg = a.delta_g()
    # g_lj G^l_ik and g_il G^l_jk
    t1 = np.einsum("lj,lik->ijk", a.g, gb)
    t2 = np.einsum("il,ljk->ijk", a.g, gb)
    L = -0.5 * (dg - t1 - t2)
    return LandsbergEval(L=L, L_raised=np.einsum("ks,sij->kij", a.g_inv, L))


def hashiguchi_coefficients(c: ConnectionCoeffs, L: LandsbergEval) -> ConnectionCoeffs:
    if c.kind != "chern":
        raise ValueError(f"expected chern coefficients, got {c.kind!r}")
    return ConnectionCoeffs(c.horizontal + L.L_raised, c.vertical.copy(), "hashiguchi")


def ambient_connections(a: AmbientEval) -> tuple[ConnectionCoeffs, LandsbergEval, ConnectionCoeffs]:
    chern = chern_coefficients(a)
    lands = landsberg_tensor(a)
    return chern, lands, hashiguchi_coefficients(chern, lands)


def koszul_hashiguchi(a: AmbientEval, L: LandsbergEval) -> np.ndarray:
    """1/2 g^{mu lam} (delta_a g_{b lam} + delta_b g_{a lam} - delta_lam g_ab + 2 L_ab lam)."""
    dg = a.delta_g()
    rhs = (np.einsum("bla->abl", dg)
           + np.einsum("alb->abl", dg)
           - np.einsum("abl->abl", dg)
           + 2.0 * L.L)
    return 0.5 * np.einsum("ml,abl->mab", a.g_inv, rhs)
