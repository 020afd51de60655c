import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.special import gamma

from nlsplice.kernel import (KernelSpec, eval_kernel, make_kernel, normalization_constant,
                             second_moment)


def test_normalization_constant_values():
    assert_allclose(normalization_constant("integrable", 1, 0.0, 1.0), 3.0, rtol=1e-14)
    assert_allclose(normalization_constant("integrable", 2, 0.0, 1.0), 8 / np.pi, rtol=1e-14)
    assert_allclose(normalization_constant("fractional", 1, 0.75, 0.1), 0.5 * 0.1 ** -0.5,
                    rtol=1e-14)


@pytest.mark.parametrize("family, d, p, delta", [
    ("fractional", 1, 0.25, 0.3), ("fractional", 2, 0.5, 0.2),
    ("integrable", 1, 1.0, 0.5), ("integrable", 2, 0.0, 0.7)])
def test_c_norm_matches_formula(family, d, p, delta):
    sphere = d * gamma(d / 2) / np.pi ** (d / 2)
    if family == "fractional":
        expected = (2 - 2 * p) * delta ** (2 * p - 2) * sphere
        k = KernelSpec(family, d, delta, s=p)
    else:
        expected = (d + 2 - p) * sphere / delta ** (d + 2 - p)
        k = KernelSpec(family, d, delta, alpha=p)
    assert_allclose(k.c_norm, expected, rtol=1e-14)


@pytest.mark.parametrize("args", [
    ("fractional", 1, 0.0, 1.0), ("fractional", 1, 1.0, 1.0),
    ("integrable", 1, -0.5, 1.0), ("integrable", 1, 3.0, 1.0),
    ("integrable", 2, 0.0, 0.0), ("integrable", 2, 0.0, np.inf),
    ("integrable", 3, 0.0, 1.0), ("gaussian", 1, 0.0, 1.0)])
def test_normalization_constant_rejects(args):
    with pytest.raises(ValueError):
        normalization_constant(*args)


def test_make_kernel_aliases():
    assert make_kernel("constant", 1, 0.1).alpha == 0.0
    assert make_kernel("inverse_distance", 2, 0.1).alpha == 1.0
    with pytest.raises(ValueError):
        make_kernel("laplace", 1, 0.1)
    with pytest.raises(ValueError):
        make_kernel("fractional", 1, 0.1)


def test_eval_kernel_examples():
    k = make_kernel("constant", 1, 1.0)
    assert eval_kernel(k, 0.0, 0.5) == pytest.approx(3.0, rel=1e-14)
    for name, s in [("constant", None), ("fractional", 0.4), ("inverse_distance", None)]:
        k2 = make_kernel(name, 2, 0.2, s=s)
        assert eval_kernel(k2, [0.0, 0.0], [0.3, 0.0]) == 0.0


def test_eval_kernel_vectorized_and_scaled():
    k = make_kernel("fractional", 2, 0.5, s=0.3)
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.2, 0.2, (50, 2))
    y = rng.uniform(-0.2, 0.2, (50, 2))
    r = np.linalg.norm(x - y, axis=1)
    v = eval_kernel(k, x, y)
    inside = r < k.delta
    assert_allclose(v[inside] * r[inside] ** (2 + 0.6), k.c_norm, rtol=1e-13)
    assert np.all(v[~inside] == 0)


@pytest.mark.parametrize("k, expected", [
    (make_kernel("constant", 1, 0.7), 2.0),
    (make_kernel("fractional", 1, 0.1, s=0.25), 2.0),
    (make_kernel("inverse_distance", 2, 0.2), 4.0)])
def test_second_moment_examples(k, expected):
    assert second_moment(k) == pytest.approx(expected, abs=1e-10)


def test_second_moment_against_adaptive_quadrature():
    # independent route: 1D integral of z^2 gamma over (-delta, delta)
    k = make_kernel("fractional", 1, 0.3, s=0.6)
    val = 2 * quad(lambda z: z ** 2 * k.c_norm * z ** (-k.exponent), 0, k.delta)[0]
    assert_allclose(val, 2.0, rtol=1e-8)
    assert_allclose(second_moment(k), val, rtol=1e-8)


def test_kernel_is_immutable():
    k = make_kernel("constant", 1, 0.1)
    with pytest.raises(AttributeError):
        k.delta = 0.2
