import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from nlsplice.quadrature import (gauss_jacobi01, gauss_legendre01, sauter_schwab,
                                 subdivide_reference, triangle_rule)


def test_gauss_legendre01_polynomial_exactness():
    t, w = gauss_legendre01(4)
    for k in range(8):
        assert_allclose(w @ t ** k, 1.0 / (k + 1), rtol=1e-14)


@pytest.mark.parametrize("a", [-0.5, 0.3, 1.0, 2.4])
def test_gauss_jacobi01_against_adaptive_quadrature(a):
    t, w = gauss_jacobi01(10, a)
    g = lambda x: np.cos(3 * x) + x ** 3
    expected = quad(lambda x: x ** a * g(x), 0, 1, limit=200)[0]
    assert_allclose(w @ g(t), expected, rtol=1e-9)


def test_gauss_jacobi01_rejects_bad_weight():
    with pytest.raises(ValueError):
        gauss_jacobi01(3, -1.0)


def test_triangle_rule_exactness():
    p, w = triangle_rule(3)
    assert_allclose(w.sum(), 0.5, rtol=1e-14)
    # int_T x^i y^j = i! j! / (i + j + 2)!
    for i, j, exact in [(1, 0, 1 / 6), (2, 1, 1 / 60), (0, 5, 1 / 42), (3, 2, 1 / 420)]:
        assert_allclose(w @ (p[:, 0] ** i * p[:, 1] ** j), exact, rtol=1e-13)


def test_subdivide_reference_keeps_area_and_points_inside():
    p, w = subdivide_reference(*triangle_rule(2), 2)
    assert len(w) == 16 * 4
    assert_allclose(w.sum(), 0.5, rtol=1e-14)
    assert np.all(p >= -1e-15) and np.all(p.sum(axis=1) <= 1 + 1e-15)


@pytest.mark.parametrize("adjacency", ["identical", "edge", "vertex"])
def test_sauter_schwab_integrates_products(adjacency):
    p, q, w = sauter_schwab(5, adjacency)
    # the caller's xi integral of xi**3 contributes 1/4; constant integrand gives |T|^2
    assert_allclose(w.sum() / 4, 0.25, rtol=1e-13)
    # x1 * y2 is homogeneous of degree 2: xi integral of xi**5 gives 1/6
    assert_allclose((w * p[:, 0] * q[:, 1]).sum() / 6, 1 / 36, rtol=1e-12)
    assert np.all(p >= -1e-14) and np.all(p.sum(axis=1) <= 1 + 1e-14)
    assert np.all(q >= -1e-14) and np.all(q.sum(axis=1) <= 1 + 1e-14)


def _coulomb_potential_of_reference_triangle(x):
    # int_T |x - y|^-1 dy in closed form, summed edge by edge in polar coordinates
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    total = np.zeros(len(x))
    for i in range(3):
        edge = verts[(i + 1) % 3] - verts[i]
        e = edge / np.linalg.norm(edge)
        a, b = verts[i] - x, verts[(i + 1) % 3] - x
        dist = np.abs(a[:, 0] * e[1] - a[:, 1] * e[0])
        total += dist * (np.arcsinh(b @ e / dist) - np.arcsinh(a @ e / dist))
    return total


def test_sauter_schwab_identical_matches_closed_form_inner_integral():
    # |x - y|^-1 is homogeneous of degree -1, so the xi integral contributes 1/3
    p, q, w = sauter_schwab(10, "identical")
    value = (w / np.linalg.norm(p - q, axis=1)).sum() / 3
    pts, wts = subdivide_reference(*triangle_rule(8), 5)
    reference = wts @ _coulomb_potential_of_reference_triangle(pts)
    assert_allclose(value, reference, rtol=1e-6)


def test_sauter_schwab_rejects_unknown_adjacency():
    with pytest.raises(ValueError):
        sauter_schwab(3, "disjoint")
