"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that conftest prints in the terminal
summary, then asserts on the same outcome.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import ACCEPTANCE
from finsler_lab import jet as J
from finsler_lab.cli import bundled_scenes, load_scene
from finsler_lab.connections import ambient_connections
from finsler_lab.finsler import TangentPoint, adapted_frames, ambient_eval, spray_homogeneity_check
from finsler_lab.submanifold import (SubPoint, frame_identities, frame_package,
                                     gauss_weingarten_residual, hashiguchi_comparison, induce,
                                     restriction_identity)
from finsler_lab.verify import f2_float, fd_oracle

SCENES = {name: load_scene(name) for name in bundled_scenes()}
IMMERSED = {k: s for k, s in SCENES.items() if s.immersion is not None}
RIEMANNIAN_IMMERSED = {k: s for k, s in IMMERSED.items() if s.is_riemannian}


def maxabs(a):
    return float(np.max(np.abs(a)))


def report(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def ambient_points(scene):
    for pt in scene.sample_points:
        if isinstance(pt, SubPoint):
            amb = frame_package(scene.metric, scene.immersion, pt).ambient
            yield TangentPoint(tuple(amb.x), tuple(amb.y))
        else:
            yield pt


def induced(scene):
    return [induce(scene.metric, scene.immersion, pt) for pt in scene.sample_points]


def test_criterion_01_jets_match_oracle():
    scene = SCENES["randers-r3"]
    pts = [p for p in scene.sample_points[1:]]
    assert len(pts) == 20
    f = f2_float(scene.metric)
    worst = 0.0
    monomials = J.table(6, 3).monomials
    for p in pts:
        z0 = np.array(p.x + p.y)
        jet = scene.metric.finsler_squared(*(lambda z: (z[:3], z[3:]))(J.lift_point(z0)))
        for mu in monomials:
            ref = fd_oracle(f, z0, mu)
            worst = max(worst, abs(J.extract(jet, mu) - ref) / max(1.0, abs(ref)))
    report(1, worst < 1e-6, f"max relative error {worst:.2e} over {len(monomials)} partials x 20 points")


def test_criterion_02_homogeneity_and_convexity():
    hom, eig = 0.0, np.inf
    for scene in SCENES.values():
        for p in ambient_points(scene):
            hom = max(hom, *(spray_homogeneity_check(scene.metric, p, lam) for lam in (0.5, 2.0, 3.0)))
            eig = min(eig, float(np.linalg.eigvalsh(ambient_eval(scene.metric, p).g).min()))
    report(2, hom < 1e-9 and eig > 0, f"homogeneity {hom:.2e}, min eigenvalue {eig:.3g}")


def test_criterion_03_cartan_and_landsberg():
    struct, gamma = 0.0, 0.0
    for scene in SCENES.values():
        for p in ambient_points(scene):
            a = ambient_eval(scene.metric, p)
            chern, lands, _ = ambient_connections(a)
            for T in (a.A, lands.L):
                struct = max(struct, maxabs(T - np.einsum("ijk->jik", T)), maxabs(T - np.einsum("ijk->ikj", T)),
                             maxabs(np.einsum("ijk,k->ij", T, a.y)))
            gamma = max(gamma, maxabs(chern.vertical - np.einsum("ks,sij->kij", a.g_inv, a.A)))
    report(3, struct < 1e-8 and gamma < 1e-10, f"symmetry/contraction {struct:.2e}, gamma vs raised Cartan {gamma:.2e}")


def test_criterion_04_riemannian_reduction():
    scene = SCENES["round-sphere-chart"]
    hor, ver = 0.0, 0.0
    for p in scene.sample_points:
        th = p.x[0]
        _, _, hashi = ambient_connections(ambient_eval(scene.metric, p))
        expected = np.zeros((2, 2, 2))
        expected[0, 1, 1] = -np.sin(th) * np.cos(th)
        expected[1, 0, 1] = expected[1, 1, 0] = np.cos(th) / np.sin(th)
        hor = max(hor, maxabs(hashi.horizontal - expected))
        ver = max(ver, maxabs(hashi.vertical))
    report(4, hor < 1e-8 and ver < 1e-10, f"horizontal {hor:.2e}, vertical {ver:.2e}")


def test_criterion_05_duality_and_restriction():
    dual = 0.0
    for scene in SCENES.values():
        for p in ambient_points(scene):
            fr = adapted_frames(ambient_eval(scene.metric, p))
            n = len(p.y)
            dual = max(dual, maxabs(fr.coframe_matrix() @ fr.frame_matrix() - np.eye(2 * n)))
    scene = SCENES["randers-sphere"]
    restr = max(restriction_identity(frame_package(scene.metric, scene.immersion, pt))["full"]
                for pt in scene.sample_points)
    report(5, dual < 1e-10 and restr < 1e-8, f"duality {dual:.2e}, restriction identity {restr:.2e}")


def test_criterion_06_frame_identities():
    worst = max(max(frame_identities(frame_package(s.metric, s.immersion, pt)).values())
                for s in IMMERSED.values() for pt in s.sample_points)
    report(6, worst < 1e-9, f"max frame identity residual {worst:.2e} on {len(IMMERSED)} scenes")


def test_criterion_07_nonlinear_deformation():
    worst = max(maxabs(pkg.N_int - pkg.N_ind - pkg.D / pkg.F) for pkg in induced(SCENES["randers-sphere"]))
    report(7, worst < 1e-7, f"N_int - N_ind - D/F residual {worst:.2e}")


def test_criterion_08_deformation_kills_v():
    worst = max(maxabs(pkg.D @ np.asarray(pkg.point.v)) for s in IMMERSED.values() for pkg in induced(s))
    report(8, worst < 1e-8, f"max |D v| {worst:.2e}")


def test_criterion_09_gauss_weingarten():
    worst = 0.0
    for s in IMMERSED.values():
        for pkg in induced(s):
            for conn in (pkg.ambient_chern, pkg.ambient_hash):
                worst = max(worst, gauss_weingarten_residual(pkg.frames, conn, pkg.N_ind))
    report(9, worst < 1e-8, f"max reconstruction residual {worst:.2e}")


def test_criterion_10_hashiguchi_relation():
    cmps = [hashiguchi_comparison(pkg) for pkg in induced(SCENES["randers-sphere"])]
    nontrivial = [c for c in cmps if c["H_minus_Hstar"] > 1e-6 and c["D_norm"] > 1e-3]
    inds = max((c["inds_residual"] for c in nontrivial), default=np.inf)
    riem = [hashiguchi_comparison(pkg) for s in RIEMANNIAN_IMMERSED.values() for pkg in induced(s)]
    d_riem = max(c["D_norm"] for c in riem)
    gap_riem = max(c["H_minus_Hstar"] for c in riem)
    vert = max(hashiguchi_comparison(pkg)["h_minus_hstar"] for s in IMMERSED.values() for pkg in induced(s))
    ok = inds < 1e-7 and d_riem < 1e-10 and gap_riem < 1e-8 and vert < 1e-8
    report(10, ok, f"relation residual {inds:.2e} on {len(nontrivial)} nontrivial points; "
                   f"riemannian |D| {d_riem:.1e}, gap {gap_riem:.1e}; vertical gap {vert:.1e}")


def _verify(scene):
    return subprocess.run([sys.executable, "-m", "finsler_lab.cli", "verify", "--scene", scene],
                          capture_output=True)


def test_criterion_11_determinism_and_exit_codes(tmp_path):
    problems = []
    for name in bundled_scenes():
        first, second = _verify(name), _verify(name)
        if first.stdout != second.stdout or first.returncode != second.returncode:
            problems.append(f"{name} differs between runs")
        status = json.loads(first.stdout)["status"]
        if first.returncode != (0 if status == "pass" else 1):
            problems.append(f"{name}: exit {first.returncode} with status {status}")
    cases = {
        2: {"metric": {"kind": "euclidean", "dimension": 2}, "pointz": {}},
        3: {"metric": {"kind": "custom", "dimension": 2, "F": "sqrt(y1^2 - y2^2)"},
            "points": {"explicit": [{"x": [0, 0], "y": [1, 0.5]}]}},
        4: {"metric": {"kind": "euclidean", "dimension": 2},
            "immersion": {"dimension": 1, "components": ["u1^3", "u1^2"]},
            "points": {"explicit": [{"u": [0], "v": [1]}]}},
    }
    for code, doc in cases.items():
        path = tmp_path / f"case{code}.json"
        path.write_text(json.dumps(doc))
        got = _verify(str(path)).returncode
        if got != code:
            problems.append(f"expected exit {code}, got {got}")
    report(11, not problems, "; ".join(problems) or f"{len(bundled_scenes())} scenes bit-identical, exit codes 0/1/2/3/4 as documented")
