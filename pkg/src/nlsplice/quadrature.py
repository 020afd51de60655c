"""Quadrature rules on intervals, triangles and pairs of touching triangles."""
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre01(n):
    """Gauss-Legendre rule with `n` points on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi01(n, a):
    """Gauss rule on [0, 1] for the weight ``t**a`` (a > -1).

    ``sum(w * g(t))`` approximates ``int_0^1 t**a g(t) dt`` and is exact for
    polynomials ``g`` of degree ``2n - 1``.
    """
    if a <= -1.0:
        raise ValueError("weight exponent must exceed -1, got %g" % a)
    if a == 0.0:
        return gauss_legendre01(n)
    x, w = roots_jacobi(n, 0.0, a)
    return 0.5 * (x + 1.0), w * 2.0 ** (-a - 1.0)


@lru_cache(maxsize=None)
def triangle_rule(n):
    """Collapsed-tensor Gauss rule on the reference triangle.

    The reference triangle has vertices (0, 0), (1, 0), (0, 1) and area 1/2.
    Returns reference points of shape (n*n, 2) and weights
    summing to 1/2. Exact for polynomials of total degree ``2n - 1``.
    """
    u, wu = gauss_legendre01(n)
    v, wv = gauss_jacobi01(n, 1.0)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = np.outer(wu, wv)
    # (u, v) -> (u v, 1 - v) collapses the unit square; its Jacobian is v
    pts = np.column_stack([(uu * vv).ravel(), (1.0 - vv).ravel()])
    return pts, ww.ravel()


def subdivide_reference(pts, wts, depth):
    """Repeat a triangle rule on the 4**depth uniform subtriangles."""
    tris = [np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])]
    for _ in range(depth):
        new = []
        for t in tris:
            m01 = 0.5 * (t[0] + t[1])
            m12 = 0.5 * (t[1] + t[2])
            m02 = 0.5 * (t[0] + t[2])
            new += [np.array([t[0], m01, m02]), np.array([m01, t[1], m12]),
                    np.array([m02, m12, t[2]]), np.array([m12, m02, m01])]
        tris = new
    out_p, out_w = [], []
    for t in tris:
        jac = np.column_stack([t[1] - t[0], t[2] - t[0]])
        det = abs(np.linalg.det(jac))
        out_p.append(t[0] + pts @ jac.T)
        out_w.append(wts * det)
    return np.vstack(out_p), np.concatenate(out_w)


@lru_cache(maxsize=None)
def sauter_schwab(n, adjacency, grade=1):
    """Singular 4D rules for pairs of reference triangles.

    The reference triangle is {(a, b): a, b >= 0, a + b <= 1}. For
    ``"vertex"`` both triangles share reference vertex (0, 0); for ``"edge"``
    they share the reference edge (0, 0)-(1, 0) with matching orientation; for
    ``"identical"`` they coincide.

    Returns ``(p, q, w)``: every node is ``x = xi * p``,
    ``y = xi * q`` with ``xi`` in (0, 1] integrated separately by the caller,
    so ``w`` already contains the eta-Jacobian but *not* the ``xi**3`` factor.
    The caller integrates ``int_0^1 xi**3 F(xi p, xi q) d xi``.

    ``grade > 1`` maps every eta coordinate through ``t**grade``, which turns
    the half-integer powers produced by fractional kernels into polynomials.
    """
    t, wt = gauss_legendre01(n)
    e = t ** grade
    we = grade * t ** (grade - 1) * wt
    E1, E2, E3 = np.meshgrid(e, e, e, indexing="ij")
    W = (we[:, None, None] * we[None, :, None] * we[None, None, :]).ravel()
    e1, e2, e3 = E1.ravel(), E2.ravel(), E3.ravel()
    one = np.ones_like(e1)
    e12 = e1 * e2
    e123 = e12 * e3
    regions = []
    if adjacency == "identical":
        jac = e1 * e1 * e2
        regions = [
            ((one, 1 - e1 + e12), (1 - e123, 1 - e1), jac),
            ((1 - e123, 1 - e1), (one, 1 - e1 + e12), jac),
            ((one, e1 - e12 + e123), (1 - e12, e1 - e12), jac),
            ((1 - e12, e1 - e12), (one, e1 - e12 + e123), jac),
            ((1 - e123, e1 - e123), (one, e1 - e12), jac),
            ((one, e1 - e12), (1 - e123, e1 - e123), jac),
        ]
    elif adjacency == "edge":
        jac = e1 * e1
        regions = [
            ((one, e1 * e3), (1 - e12, e1 * (1 - e2)), jac),
            ((one, e1), (1 - e123, e12 * (1 - e3)), jac * e2),
            ((1 - e12, e1 * (1 - e2)), (one, e123), jac * e2),
            ((1 - e123, e12 * (1 - e3)), (one, e1), jac * e2),
            ((1 - e123, e1 * (1 - e2 * e3)), (one, e12), jac * e2),
        ]
    elif adjacency == "vertex":
        jac = e2
        regions = [
            ((one, e1), (e2, e2 * e3), jac),
            ((e2, e2 * e3), (one, e1), jac),
        ]
    else:
        raise ValueError("unknown adjacency %r" % adjacency)
    ps, qs, ws = [], [], []
    for (p1, p2), (q1, q2), jac in regions:
        # rules are written for {0 <= x2 <= x1 <= 1}; shear onto the
        # standard reference triangle
        ps.append(np.column_stack([p1 - p2, p2]))
        qs.append(np.column_stack([q1 - q2, q2]))
        ws.append(W * jac)
    return np.vstack(ps), np.vstack(qs), np.concatenate(ws)
