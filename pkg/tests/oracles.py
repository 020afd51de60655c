"""Independent brute-force evaluations used to freeze and check values.

These deliberately share no integration code with the package: 1D entries
use nested adaptive quadrature, 2D entries use graded outer subdivision with
an inner polar integral over the exact intersection of a triangle and a disc.
"""
import numpy as np
from scipy.integrate import quad


def _hat(nodes, i):
    def phi(x):
        return np.interp(x, nodes, np.eye(len(nodes))[i])
    return phi


def _indicator(nodes, k):
    a, b = nodes[k], nodes[k + 1]
    return lambda x: 1.0 if a <= x < b or (b == nodes[-1] and x == b) else 0.0


def nonlocal_entry_1d(nodes, kernel, i, j, space="P1", epsrel=1e-12):
    """``1/2 int int (v_i(x) - v_i(y))(v_j(x) - v_j(y)) gamma dy dx`` on the mesh span."""
    nodes = np.asarray(nodes, dtype=float)
    f_i = _hat(nodes, i) if space == "P1" else _indicator(nodes, i)
    f_j = _hat(nodes, j) if space == "P1" else _indicator(nodes, j)
    lo, hi = nodes[0], nodes[-1]
    c, beta, delta = kernel.c_norm, kernel.exponent, kernel.delta

    def inner(x):
        a, b = max(lo, x - delta), min(hi, x + delta)
        fx_i, fx_j = f_i(x), f_j(x)

        def g(y):
            r = abs(x - y)
            if r == 0.0:
                return 0.0
            return (fx_i - f_i(y)) * (fx_j - f_j(y)) * c * r ** (-beta)

        total = 0.0
        cuts = sorted(set([a, b, x] + [t for t in nodes if a < t < b]))
        for u, v in zip(cuts[:-1], cuts[1:]):
            if v > u:
                total += quad(g, u, v, epsabs=1e-15, epsrel=epsrel, limit=200)[0]
        return total

    total = 0.0
    for u, v in zip(nodes[:-1], nodes[1:]):
        total += quad(inner, u, v, epsabs=1e-14, epsrel=epsrel, limit=200)[0]
    return 0.5 * total


# Dunavant degree-5 rule on the reference triangle (0,0), (1,0), (0,1)
_A1, _B1 = 0.797426985353087, 0.101286507323456
_A2, _B2 = 0.059715871789770, 0.470142064105115
_W1, _W2 = 0.125939180544827, 0.132394152788506
_DUNAVANT_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2]])
_DUNAVANT_W = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])


def _tri_area(t):
    return 0.5 * abs((t[1, 0] - t[0, 0]) * (t[2, 1] - t[0, 1])
                     - (t[1, 1] - t[0, 1]) * (t[2, 0] - t[0, 0]))


def _seg_point_dist(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return np.linalg.norm(p - a - t * ab)


def _tri_tri_dist(t1, t2):
    d = np.inf
    for X, Y in ((t1, t2), (t2, t1)):
        for p in X:
            for k in range(3):
                d = min(d, _seg_point_dist(p, Y[k], Y[(k + 1) % 3]))
    return d


def _kink_distance(t2, p):
    """Distances from ``p`` to the vertices and edges of ``t2``.

    The polar inner integral is not smooth in the outer point where one of
    these distances equals the horizon.
    """
    d = [np.linalg.norm(p - v) for v in t2]
    d += [_seg_point_dist(p, t2[k], t2[(k + 1) % 3]) for k in range(3)]
    return np.array(d)


def _graded_points(t1, t2, depth, base, delta=None, kink_depth=0):
    """Outer nodes on ``t1`` refined toward ``t2``, toward the horizon kinks and ``base`` times."""
    leaves = []
    stack = [(t1, 0)]
    while stack:
        t, lev = stack.pop()
        diam = max(np.linalg.norm(t[i] - t[j]) for i in range(3) for j in range(i))
        near = lev < base or (lev < depth and _tri_tri_dist(t, t2) < diam)
        if not near and delta is not None and lev < kink_depth:
            cen = t.mean(axis=0)
            rad = max(np.linalg.norm(v - cen) for v in t)
            near = np.any(np.abs(_kink_distance(t2, cen) - delta) <= rad)
        if near:
            m01, m12, m20 = (t[0] + t[1]) / 2, (t[1] + t[2]) / 2, (t[2] + t[0]) / 2
            for c in ([t[0], m01, m20], [m01, t[1], m12], [m20, m12, t[2]], [m01, m12, m20]):
                stack.append((np.array(c), lev + 1))
        else:
            leaves.append(t)
    pts = np.concatenate([_DUNAVANT_BARY @ t for t in leaves])
    wts = np.concatenate([_DUNAVANT_W * _tri_area(t) for t in leaves])
    return pts, wts


def _halfplanes(t):
    """Outward normals n_k and offsets c_k with the triangle = {n.y <= c}."""
    orient = np.sign((t[1, 0] - t[0, 0]) * (t[2, 1] - t[0, 1])
                     - (t[1, 1] - t[0, 1]) * (t[2, 0] - t[0, 0]))
    ns, cs = [], []
    for k in range(3):
        e = t[(k + 1) % 3] - t[k]
        n = orient * np.array([e[1], -e[0]])
        ns.append(n)
        cs.append(np.dot(n, t[k]))
    return np.array(ns), np.array(cs)


def _circle_segment_angles(X, a, b, delta):
    """Angles (M, 2) where the circle of radius delta around X crosses segment ab (NaN if not)."""
    d = b - a
    f = a[None] - X
    A = d @ d
    B = 2 * f @ d
    C = np.einsum("mi,mi->m", f, f) - delta ** 2
    disc = B * B - 4 * A * C
    out = np.full((len(X), 2), np.nan)
    sq = np.sqrt(np.maximum(disc, 0.0))
    for col, sgn in enumerate((-1, 1)):
        t = (-B + sgn * sq) / (2 * A)
        ok = (disc > 0) & (t >= 0) & (t <= 1)
        p = f + t[:, None] * d[None]
        out[ok, col] = np.arctan2(p[ok, 1], p[ok, 0])
    return out


def _polar_sums(X, t2, kernel, n_theta, skip_low):
    """Integrals of gamma, (y - x) gamma, (y - x)(y - x)^T gamma over t2 cap B(x, delta).

    Vectorized over the rows of ``X``; returns arrays of shape (M,), (M, 2), (M, 2, 2).
    """
    c, beta, delta = kernel.c_norm, kernel.exponent, kernel.delta
    X = np.atleast_2d(X)
    M = len(X)
    ns, cs = _halfplanes(t2)
    br = [np.arctan2(t2[k, 1] - X[:, 1], t2[k, 0] - X[:, 0])[:, None] for k in range(3)]
    for k in range(3):
        ang = _circle_segment_angles(X, t2[k], t2[(k + 1) % 3], delta)
        br.append(np.where(np.isnan(ang), br[0], ang))
    br = np.sort(np.mod(np.concatenate(br, axis=1), 2 * np.pi), axis=1)
    br = np.concatenate([br, br[:, :1] + 2 * np.pi], axis=1)
    g, gw = np.polynomial.legendre.leggauss(n_theta)
    lo, hi = br[:, :-1, None], br[:, 1:, None]
    th = (lo + (hi - lo) * (g + 1) / 2).reshape(M, -1)
    wt = ((hi - lo) / 2 * gw).reshape(M, -1)
    ex, ey = np.cos(th), np.sin(th)
    r_in = np.zeros_like(th)
    r_out = np.full_like(th, delta)
    for k in range(3):
        ne = ex * ns[k, 0] + ey * ns[k, 1]
        slack = (cs[k] - X @ ns[k])[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = slack / ne
        pos = ne > 1e-300
        neg = ne < -1e-300
        r_out = np.where(pos, np.minimum(r_out, bound), r_out)
        r_in = np.where(neg, np.maximum(r_in, bound), r_in)
        r_out = np.where(~pos & ~neg & (slack < 0), 0.0, r_out)
    ok = r_out > r_in
    r_in = np.where(ok, r_in, 1.0)
    r_out = np.where(ok, r_out, 1.0)

    def mom(p):
        with np.errstate(divide="ignore", invalid="ignore"):
            if abs(p + 1) < 1e-12:
                v = np.log(r_out / r_in)
            else:
                v = (r_out ** (p + 1) - r_in ** (p + 1)) / (p + 1)
        return np.where(ok, v, 0.0) * wt

    m2 = mom(3 - beta)
    S2 = np.empty((M, 2, 2))
    S2[:, 0, 0] = (m2 * ex * ex).sum(1)
    S2[:, 1, 1] = (m2 * ey * ey).sum(1)
    S2[:, 0, 1] = S2[:, 1, 0] = (m2 * ex * ey).sum(1)
    if skip_low:
        return None, None, c * S2
    m0 = mom(1 - beta)
    m1 = mom(2 - beta)
    S0 = m0.sum(1)
    S1 = np.stack([(m1 * ex).sum(1), (m1 * ey).sum(1)], axis=1)
    return c * S0, c * S1, c * S2


def _p1_basis(t):
    """Return (value function, constant gradient) of the three hat functions of ``t``."""
    J = np.column_stack([t[1] - t[0], t[2] - t[0]])
    Jinv = np.linalg.inv(J)
    G = np.vstack([-Jinv.sum(axis=0), Jinv])

    def val(x):
        lam12 = Jinv @ (x - t[0])
        return np.array([1 - lam12.sum(), lam12[0], lam12[1]])

    return val, G


def nonlocal_matrix_2d(mesh, kernel, space="P1", depth=9, base=1, n_theta=24, kink_depth=0):
    """Dense nonlocal stiffness matrix over all elements of ``mesh``.

    Each unordered pair is integrated once with ``x`` on the first element
    and doubled; the integrand is symmetric in ``x`` and ``y``.
    """
    V = mesh.vertices
    E = mesh.elements
    n = len(V) if space == "P1" else len(E)
    A = np.zeros((n, n))
    for k1 in range(len(E)):
        t1 = V[E[k1]]
        for k2 in range(k1, len(E)):
            t2 = V[E[k2]]
            if _tri_tri_dist(t1, t2) >= kernel.delta:
                continue
            same = k1 == k2
            if same and space == "P0":
                continue
            if space == "P1":
                dofs = np.unique(np.concatenate([E[k1], E[k2]]))
                pos1 = np.searchsorted(dofs, E[k1])
                pos2 = np.searchsorted(dofs, E[k2])
                val1, _ = _p1_basis(t1)
                val2, G2 = _p1_basis(t2)
            else:
                dofs = np.array([k1, k2])
            xs, ws = _graded_points(t1, t2, depth, base,
                                    kernel.delta, kink_depth)
            S0, S1, S2 = _polar_sums(xs, t2, kernel, n_theta, skip_low=same)
            if space == "P0":
                loc = np.sum(ws * S0) * np.array([[1.0, -1.0], [-1.0, 1.0]])
            else:
                a = np.zeros((len(xs), len(dofs)))
                a[:, pos1] += np.array([val1(x) for x in xs])
                a[:, pos2] -= np.array([val2(x) for x in xs])
                B = np.zeros((len(dofs), 2))
                B[pos2] -= G2
                loc = B @ np.einsum("m,mij->ij", ws, S2) @ B.T
                if not same:
                    bs = S1 @ B.T
                    loc += np.einsum("m,mi,mj->ij", ws * S0, a, a)
                    cross = np.einsum("m,mi,mj->ij", ws, a, bs)
                    loc += cross + cross.T
            A[np.ix_(dofs, dofs)] += (0.5 if same else 1.0) * loc
    return A


def nonlocal_matrix_1d(nodes, kernel, space="P1"):
    """Dense 1D matrix from :func:`nonlocal_entry_1d`, using symmetry."""
    n = len(nodes) if space == "P1" else len(nodes) - 1
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            A[i, j] = A[j, i] = nonlocal_entry_1d(nodes, kernel, i, j, space)
    return A


# Frozen configurations; regenerate with ``python tests/oracles.py``
ORACLE_1D = {"h": 1.0 / 6, "delta_factor": 2.5}
ORACLE_2D = {"h": 0.25, "delta": 0.625, "s": 0.25,
             "depth": 6, "base": 2, "n_theta": 20, "kink_depth": 6}
DATA_FILE = "data/oracle_matrices.npz"


def _freeze():
    import os
    import time

    from nlsplice.kernel import make_kernel
    from nlsplice.mesh import structured_triangle_mesh, uniform_interval_mesh

    out = {}
    m1 = uniform_interval_mesh(0.0, 1.0, ORACLE_1D["h"])
    nodes = m1.vertices[:, 0]
    delta = ORACLE_1D["delta_factor"] * ORACLE_1D["h"]
    for name in ("constant", "inverse_distance"):
        k = make_kernel(name, 1, delta)
        for space in ("P1", "P0"):
            t = time.time()
            out["1d_%s_%s" % (name, space)] = nonlocal_matrix_1d(nodes, k, space)
            print("1d", name, space, "%.1f s" % (time.time() - t), flush=True)
    c = ORACLE_2D
    m2 = structured_triangle_mesh(0.0, 1.0, 0.0, 1.0, c["h"])
    for name, s in (("constant", None), ("fractional", c["s"])):
        k = make_kernel(name, 2, c["delta"], s=s)
        t = time.time()
        out["2d_%s_P1" % name] = nonlocal_matrix_2d(m2, k, depth=c["depth"], base=c["base"],
                                                   n_theta=c["n_theta"], kink_depth=c["kink_depth"])
        print("2d", name, "%.1f s" % (time.time() - t), flush=True)
    np.savez(os.path.join(os.path.dirname(os.path.abspath(__file__)), DATA_FILE), **out)


if __name__ == "__main__":
    _freeze()
