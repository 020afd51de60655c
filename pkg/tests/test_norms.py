import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nlsplice.mesh import refine_uniform, structured_triangle_mesh, uniform_interval_mesh
from nlsplice.norms import (CompositeFunction, FEFunction, error_norm, locate,
                            nested_vertex_values)


def test_locate_points_and_outside():
    m = structured_triangle_mesh(0, 1, 0, 1, 0.5)
    pts = np.array([[0.1, 0.2], [0.9, 0.6], [1.5, 0.5]])
    owner, bary = locate(m, pts)
    assert owner[2] == -1
    for i in range(2):
        c = m.element_coords[owner[i]]
        assert_allclose(bary[i] @ c, pts[i], atol=1e-14)
        assert np.all(bary[i] >= -1e-12)


def test_fe_function_evaluation():
    m = uniform_interval_mesh(0, 1, 0.25)
    u = FEFunction(m, m.vertices[:, 0] ** 2)
    assert_allclose(u(np.array([[0.125]])), [0.03125])
    p0 = FEFunction(m, np.arange(4.0), "P0", elements=np.array([1, 2]))
    v = p0(np.array([[0.1], [0.3], [0.6]]))
    assert np.isnan(v[0]) and v[1] == 1.0 and v[2] == 2.0
    both = CompositeFunction((p0, u))
    # P0 part wins where defined, P1 interpolant of x^2 elsewhere
    assert_allclose(both(np.array([[0.1], [0.3]])), [0.025, 1.0], rtol=1e-14)


def test_l2_norm_of_linear_function_1d_and_2d():
    m = uniform_interval_mesh(0, 1, 0.25)
    u = FEFunction(m, m.vertices[:, 0])
    assert_allclose(error_norm(u, None, "L2", mesh=m), np.sqrt(1 / 3), rtol=1e-12)
    t = structured_triangle_mesh(0, 1, 0, 1, 0.5)
    v = FEFunction(t, t.vertices[:, 0] + t.vertices[:, 1])
    # int (x + y)^2 over the unit square = 7/6
    assert_allclose(error_norm(v, None, "L2", mesh=t), np.sqrt(7 / 6), rtol=1e-12)


def test_exact_nested_norms_with_sign_change():
    fine = refine_uniform(refine_uniform(uniform_interval_mesh(0, 1, 1.0)))
    u = FEFunction(fine, fine.vertices[:, 0] - 0.3)
    # exact evaluation on the nested mesh of the zero function
    assert_allclose(error_norm(u, FEFunction(fine, np.zeros(fine.num_vertices))),
                    np.sqrt((0.7 ** 3 + 0.3 ** 3) / 3), rtol=1e-12)
    assert_allclose(error_norm(u, FEFunction(fine, np.zeros(fine.num_vertices)), "L1"),
                    (0.7 ** 2 + 0.3 ** 2) / 2, rtol=1e-12)
    assert_allclose(error_norm(u, FEFunction(fine, np.zeros(fine.num_vertices)), "Linf"),
                    0.7, rtol=1e-12)


def test_l1_norm_in_2d_with_sign_change():
    t = structured_triangle_mesh(0, 1, 0, 1, 1.0)
    u = FEFunction(t, t.vertices[:, 0] - 0.5)
    # |x - 1/2| integrates to 1/4 over the unit square
    exact = error_norm(u, FEFunction(t, np.zeros(t.num_vertices)), "L1")
    assert_allclose(exact, 0.25, rtol=1e-12)


def test_quadrature_norm_of_step_with_subdivision():
    m = uniform_interval_mesh(0, 1, 0.25)
    zero = FEFunction(m, np.zeros(m.num_vertices))
    step = lambda x: (np.asarray(x) < 0.5).astype(float)
    assert_allclose(error_norm(zero, step, "L2", mesh=m), np.sqrt(0.5), rtol=1e-12)
    assert_allclose(error_norm(zero, step, "L1", mesh=m, subdivide=2), 0.5, rtol=1e-12)


def test_nested_vertex_values_keep_discontinuities():
    m = uniform_interval_mesh(0, 1, 0.5)
    p0 = FEFunction(m, np.array([1.0, 3.0]), "P0")
    V = nested_vertex_values(p0, m, np.arange(2))
    assert_allclose(V, [[1.0, 1.0], [3.0, 3.0]], atol=1e-9)


def test_error_norm_rejections():
    m = uniform_interval_mesh(0, 1, 0.5)
    u = FEFunction(m, np.zeros(3), elements=np.array([0]))
    with pytest.raises(ValueError):
        error_norm(u, None, "H1", mesh=m)
    with pytest.raises(ValueError):
        error_norm(u, None, "L2", mesh=m, elements=np.array([], dtype=int))
    with pytest.raises(ValueError):
        error_norm(u, None, "L2", mesh=m)


@settings(max_examples=25, deadline=None)
@given(vals=st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_norm_properties_on_single_triangle(vals):
    t = structured_triangle_mesh(0, 1, 0, 1, 1.0)
    v = np.array(vals + [vals[0]])
    u = FEFunction(t, v)
    z = FEFunction(t, np.zeros(4))
    l1 = error_norm(u, z, "L1")
    l2 = error_norm(u, z, "L2")
    linf = error_norm(u, z, "Linf")
    # unit area: L1 <= L2 <= Linf, and L1 agrees with a fine quadrature
    assert l1 <= l2 * (1 + 1e-12) + 1e-14 and l2 <= linf * (1 + 1e-12) + 1e-14
    approx = error_norm(u, None, "L1", mesh=t, subdivide=5)
    assert abs(approx - l1) <= 1e-3 * max(1.0, linf)
