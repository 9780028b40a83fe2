import numpy as np
import pytest
from hypothesis import given, strategies as st

from finsler_lab.connections import (ambient_connections, berwald_coefficients, chern_coefficients,
                                     hashiguchi_coefficients, koszul_hashiguchi, landsberg_tensor)
from finsler_lab.finsler import MetricSpec, TangentPoint, ambient_eval
from finsler_lab.verify import _fd_christoffel

RANDERS_VAR = MetricSpec.randers(["0.2*sin(x2)", "0.1*x1", "0.15"],
                                 [["1 + 0.1*x3^2", "0", "0"], ["0", "1", "0.1*x1"], ["0", "0.1*x1", "1"]])
SPHERE = MetricSpec.riemannian([["1", "0"], ["0", "sin(x1)^2"]])
WARPED = MetricSpec.riemannian([["1 + 0.3*x2^2", "0.1*x1"], ["0.1*x1", "exp(0.2*x1)"]])

points3 = (st.lists(st.floats(-1, 1), min_size=3, max_size=3),
           st.lists(st.floats(-2, 2), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.2))


def at(metric, x, y):
    return ambient_eval(metric, TangentPoint(tuple(x), tuple(y)))


def test_euclidean_connections_vanish():
    chern, lands, hashi = ambient_connections(at(MetricSpec.euclidean(3), [0, 1, 2], [1, 0, 0]))
    for arr in (chern.horizontal, chern.vertical, lands.L, hashi.horizontal, hashi.vertical):
        assert np.max(np.abs(arr)) == 0.0


@pytest.mark.parametrize("theta", [0.4, np.pi / 4, 1.2, 2.5])
def test_round_sphere_christoffels(theta):
    _, _, hashi = ambient_connections(at(SPHERE, [theta, 0.3], [0.7, -1.1]))
    expected = np.zeros((2, 2, 2))
    expected[0, 1, 1] = -np.sin(theta) * np.cos(theta)
    expected[1, 0, 1] = expected[1, 1, 0] = 1 / np.tan(theta)
    assert np.max(np.abs(hashi.horizontal - expected)) < 1e-12
    assert np.max(np.abs(hashi.vertical)) < 1e-12


def test_riemannian_reduction_against_finite_differences():
    a = at(WARPED, [0.4, -0.6], [1.0, 0.3])
    chern, lands, hashi = ambient_connections(a)
    assert np.max(np.abs(lands.L)) < 1e-12
    assert np.max(np.abs(hashi.horizontal - _fd_christoffel(WARPED, a.x))) < 1e-8
    assert np.allclose(berwald_coefficients(a), chern.horizontal, atol=1e-11)


@given(*points3)
def test_chern_structure(x, y):
    a = at(RANDERS_VAR, x, y)
    chern = chern_coefficients(a)
    y = np.asarray(y)
    assert np.max(np.abs(chern.horizontal - np.einsum("kij->kji", chern.horizontal))) < 1e-12
    assert np.max(np.abs(np.einsum("ljk,j,k->l", chern.horizontal, y, y) - 2 * a.G)) < 1e-10
    assert np.max(np.abs(chern.vertical - np.einsum("ks,sij->kij", a.g_inv, a.A))) < 1e-13


@given(*points3)
def test_landsberg_structure(x, y):
    a = at(RANDERS_VAR, x, y)
    L = landsberg_tensor(a).L
    assert np.max(np.abs(L - np.einsum("ijk->jki", L))) < 1e-10
    assert np.max(np.abs(L - np.einsum("ijk->jik", L))) < 1e-10
    assert np.max(np.abs(np.einsum("ijk,k->ij", L, y))) < 1e-10


@given(*points3)
def test_hashiguchi_matches_koszul_formula(x, y):
    a = at(RANDERS_VAR, x, y)
    _, lands, hashi = ambient_connections(a)
    assert np.max(np.abs(koszul_hashiguchi(a, lands) - hashi.horizontal)) < 1e-10


def test_landsberg_vanishes_for_constant_randers():
    a = at(MetricSpec.randers(["0.3", "0", "0"]), [0, 0, 0], [1, 1, 0])
    assert np.max(np.abs(landsberg_tensor(a).L)) < 1e-13


def test_landsberg_nonzero_for_variable_randers():
    a = at(RANDERS_VAR, [0.3, 0.5, -0.2], [1.0, 0.2, 0.4])
    assert np.max(np.abs(landsberg_tensor(a).L)) > 1e-3


def test_hashiguchi_requires_chern():
    a = at(RANDERS_VAR, [0, 0, 0], [1, 0, 0])
    _, lands, hashi = ambient_connections(a)
    with pytest.raises(ValueError):
        hashiguchi_coefficients(hashi, lands)


def test_berwald_needs_order_four():
    a = ambient_eval(RANDERS_VAR, TangentPoint((0, 0, 0), (1, 0, 0)), order=3)
    with pytest.raises(ValueError):
        berwald_coefficients(a)
