import math

import numpy as np
import pytest

from finsler_lab import jet as J
from finsler_lab.cli import load_scene
from finsler_lab.errors import SceneError
from finsler_lab.finsler import MetricSpec, TangentPoint, ambient_eval
from finsler_lab.verify import (FIBER_SCALES, Scene, f2_float, fd_oracle, random_points,
                                run_suite, thread_count)


def test_oracle_on_polynomials_and_sin():
    assert fd_oracle(lambda z: z[0] ** 2, [1.0], (2,)) == pytest.approx(2.0, abs=1e-8)
    assert fd_oracle(lambda z: z[0] ** 2 * z[1], [1.0, 1.0], (1, 1)) == pytest.approx(2.0, abs=1e-8)
    assert fd_oracle(lambda z: math.sin(z[0]), [0.0], (3,)) == pytest.approx(-1.0, abs=1e-6)
    assert fd_oracle(lambda z: 7.0, [0.3], (0,)) == 7.0


def test_oracle_matches_jets_on_randers():
    metric = MetricSpec.randers(["0.3", "0", "0"])
    f = f2_float(metric)
    z0 = np.array([0.1, 0.2, 0.3, 1.0, 0.4, -0.3])
    jet = metric.finsler_squared(*(lambda z: (z[:3], z[3:]))(J.lift_point(z0)))
    for mu in [(0, 0, 0, 1, 1, 0), (0, 0, 0, 2, 0, 1), (0, 0, 0, 0, 0, 3)]:
        ref = fd_oracle(f, z0, mu)
        assert abs(J.extract(jet, mu) - ref) / max(1, abs(ref)) < 1e-6


def test_oracle_does_not_touch_jets(monkeypatch):
    metric = MetricSpec.randers(["0.2*x1", "0", "0"])

    def boom(*a, **k):
        raise AssertionError("jet code used by the oracle")

    monkeypatch.setattr(J.Jet, "__init__", boom)
    value = fd_oracle(f2_float(metric), [0.1, 0.0, 0.0, 1.0, 0.0, 0.0], (0, 0, 0, 2, 0, 0))
    assert np.isfinite(value)


def test_random_points_cycle_fiber_scales(rng):
    pts = random_points(rng, [[0, 1], [2, 3]], 6, lambda b, f: TangentPoint(tuple(b), tuple(f)))
    norms = [np.linalg.norm(p.y) for p in pts]
    assert np.allclose(norms, list(FIBER_SCALES) * 2)
    assert all(0 <= p.x[0] <= 1 and 2 <= p.x[1] <= 3 for p in pts)


def test_thread_count(monkeypatch):
    monkeypatch.setenv("FINSLER_LAB_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("FINSLER_LAB_THREADS", "many")
    with pytest.raises(SceneError):
        thread_count()
    monkeypatch.delenv("FINSLER_LAB_THREADS")
    assert 1 <= thread_count() <= 4


def test_euclidean_plane_all_pass():
    report = run_suite(load_scene("euclidean-plane"))
    assert report.passed
    assert report.num_points >= 10
    for r in report.records:
        if r.comparison == "le" and r.check != "ambient.oracle_agreement":
            assert r.max_residual < 1e-10, r


def test_riemannian_sphere_has_no_deformation():
    report = run_suite(load_scene("riemannian-sphere"))
    assert report.passed
    assert report.record("sub.deformation_norm").max_residual < 1e-10
    assert report.record("sub.hashiguchi_gap").max_residual < 1e-8


def test_randers_sphere_exhibits_effects():
    report = run_suite(load_scene("randers-sphere"))
    for name in ("sub.deformation_norm", "sub.hashiguchi_gap"):
        rec = report.record(name)
        assert rec.comparison == "gt" and rec.passed
    for name in ("sub.nonlinear_deformation", "sub.deformation_annihilates_v",
                 "sub.vertical_hashiguchi_equal", "sub.gauss_weingarten_hashiguchi"):
        assert report.record(name).passed


def test_thread_count_does_not_change_results():
    scene = load_scene("randers-variable")
    assert run_suite(scene, threads=1).to_dict() == run_suite(scene, threads=4).to_dict()


def test_tolerance_override_flips_a_check():
    scene = load_scene("euclidean-plane", {"ambient.homogeneity": -1.0})
    rec = run_suite(scene).record("ambient.homogeneity")
    assert not rec.passed and rec.tolerance == -1.0


def test_crashing_point_becomes_failed_record():
    metric = MetricSpec.custom("sqrt(y1^2 + (1 + x1)*y2^2)", 2)
    pts = [TangentPoint((0, 0), (1.0, 0.1)), TangentPoint((-2, 0), (1.0, 0.5))]
    ambient_eval(metric, pts[0])
    report = run_suite(Scene("broken", metric, None, pts), threads=1)
    assert not report.passed
    assert all(r.error and "point 1" in r.error for r in report.records)


def test_scene_needs_points():
    with pytest.raises(SceneError):
        Scene("empty", MetricSpec.euclidean(2), None, [])
