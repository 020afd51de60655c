"""Radially symmetric, truncated nonlocal kernels.

Two families are supported, both with a finite horizon ``delta``:

* fractional:  ``c * |x - y|**(-d - 2 s)`` for ``|x - y| < delta``
* integrable:  ``c * |x - y|**(-alpha)`` for ``|x - y| < delta``

The constant ``c`` is chosen so that the second moment of the kernel equals
``2 d``, i.e. the nonlocal operator tends to the Laplacian as ``delta -> 0``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .quadrature import gauss_jacobi01

FAMILY_ALIASES = {
    "fractional": ("fractional", None),
    "integrable": ("integrable", None),
    "constant": ("integrable", 0.0),
    "inverse_distance": ("integrable", 1.0),
}


def normalization_constant(family, d, s_or_alpha, delta):
    """Closed-form scaling constant of a truncated kernel.

    Parameters
    ----------
    family : {"fractional", "integrable"}
    d : int
        Spatial dimension, 1 or 2.
    s_or_alpha : float
        Fractional order ``s`` in (0, 1), or singularity strength ``alpha``
        in [0, d + 2). Values ``alpha >= d`` (e.g. the inverse distance kernel
        in 1D) give a non-integrable kernel whose bilinear form is still finite.
    delta : float
        Horizon, finite and positive.
    """
    if d not in (1, 2):
        raise ValueError("unsupported dimension %r" % (d,))
    if not np.isfinite(delta) or delta <= 0:
        raise ValueError("horizon must be finite and positive, got %r" % (delta,))
    sphere = d * gamma(d / 2.0) / np.pi ** (d / 2.0)
    if family == "fractional":
        s = s_or_alpha
        if not 0.0 < s < 1.0:
            raise ValueError("fractional order must lie in (0, 1), got %r" % (s,))
        return (2.0 - 2.0 * s) * delta ** (2.0 * s - 2.0) * sphere
    if family == "integrable":
        alpha = s_or_alpha
        if not 0.0 <= alpha < d + 2.0:
            raise ValueError("alpha must lie in [0, d + 2), got %r" % (alpha,))
        return (d + 2.0 - alpha) * sphere / delta ** (d + 2.0 - alpha)
    raise ValueError("unknown kernel family %r" % (family,))


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a truncated radial kernel.

    Use :func:`make_kernel` to build one from a family name.
    """

    family: str
    d: int
    delta: float
    s: float = None
    alpha: float = None
    c_norm: float = field(default=None, init=False)

    def __post_init__(self):
        param = self.s if self.family == "fractional" else self.alpha
        if param is None:
            raise ValueError("missing kernel parameter for %s family" % self.family)
        c = normalization_constant(self.family, self.d, param, self.delta)
        object.__setattr__(self, "c_norm", c)

    @property
    def exponent(self):
        """Power ``beta`` in ``|z|**(-beta)``."""
        if self.family == "fractional":
            return self.d + 2.0 * self.s
        return float(self.alpha)

    @property
    def is_singular(self):
        return self.exponent > 0.0

    def radial(self, r):
        """Kernel value as a function of the distance ``r`` (vectorized)."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            val = self.c_norm * r ** (-self.exponent)
        return np.where(r < self.delta, val, 0.0)

    def describe(self):
        if self.family == "fractional":
            return "fractional(d=%d, s=%g, delta=%g)" % (self.d, self.s, self.delta)
        return "integrable(d=%d, alpha=%g, delta=%g)" % (self.d, self.alpha, self.delta)


def make_kernel(name, d, delta, s=None, alpha=None):
    """Build a kernel from a configuration name.

    ``name`` is one of ``fractional``, ``integrable``, ``constant`` or
    ``inverse_distance``; the last two fix ``alpha`` to 0 and 1.
    """
    try:
        family, fixed_alpha = FAMILY_ALIASES[name]
    except KeyError:
        raise ValueError("unknown kernel name %r" % (name,)) from None
    if fixed_alpha is not None:
        alpha = fixed_alpha
    return KernelSpec(family=family, d=d, delta=float(delta), s=s, alpha=alpha)


def eval_kernel(k, x, y):
    """Evaluate ``gamma(x, y)`` for points (or stacks of points) x and y.

    In 1D points may be given as scalars. The value at ``x == y`` is infinite
    for singular kernels; callers must avoid it.
    """
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if k.d == 1 and (diff.ndim == 0 or diff.shape[-1] != 1):
        r = np.abs(diff)
    else:
        r = np.linalg.norm(diff, axis=-1)
    out = k.radial(r)
    return out.item() if out.ndim == 0 else out


def second_moment(k, n=64):
    """``int_{B_delta} |z|^2 gamma(0, z) dz`` by radial Gauss-Jacobi quadrature.

    The weight ``r**(d + 1 - beta)`` is absorbed into the rule, so the result
    is exact up to rounding for every admissible kernel.
    """
    a = k.d + 1.0 - k.exponent
    t, w = gauss_jacobi01(n, a)
    sphere_area = 2.0 * np.pi ** (k.d / 2.0) / gamma(k.d / 2.0)
    # r = delta t, r**a dr = delta**(a + 1) t**a dt; the remaining integrand is 1
    return k.c_norm * sphere_area * k.delta ** (a + 1.0) * np.sum(w)
