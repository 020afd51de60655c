"""Galerkin stiffness matrices of the truncated nonlocal diffusion operator.

The bilinear form is

    a(u, v) = 1/2 int int (u(x) - u(y)) (v(x) - v(y)) gamma(x, y) dy dx,

which splits into a sum over unordered element pairs (K1, K2). For a pair we
collect the basis functions of both elements into one vector
``psi(x, y) = [phi_K1(x); -phi_K2(y)]`` (entries of shared DOFs merged) and
integrate ``psi psi^T gamma`` over K1 x K2; identical pairs carry a factor 1/2.

1D pairs are integrated in the difference variable ``z = y - x`` with exact
horizon clipping. 2D touching pairs use Sauter-Schwab rules with the radial
variable integrated in closed form; 2D disjoint pairs use an outer Gauss rule
in ``x`` and an inner polar integration over ``K2`` intersected with the ball.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly_local import eliminate
from .mesh import DomainPartition, candidate_pairs, element_max_distances
from .quadrature import (gauss_jacobi01, gauss_legendre01, sauter_schwab,
                         subdivide_reference, triangle_rule)

CLASS_NAMES = ("identical", "vertex_touch", "edge_touch", "disjoint")
IDENTICAL, VERTEX, EDGE, DISJOINT = range(4)
CHUNK = 4096


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature knobs for nonlocal assembly.

    Attributes
    ----------
    singular_rule_order : int
        Gauss points per direction for touching pairs (1D: Gauss-Jacobi in z;
        2D: per eta coordinate of the Sauter-Schwab rules).
    regular_rule_order : int
        Gauss points per z-piece (1D) or per angular piece (2D polar).
    outer_order : int
        Collapsed Gauss rule order for the outer ``x`` integral in 2D.
    clip_subdivision_depth : int
        Extra uniform refinement levels of the outer rule for 2D pairs cut by
        the horizon.
    """

    singular_rule_order: int = 6
    regular_rule_order: int = 8
    outer_order: int = 4
    clip_subdivision_depth: int = 0

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: int(v) for k, v in (d or {}).items()})

    def refined(self):
        """Every order raised by one step."""
        return QuadConfig(self.singular_rule_order + 1, self.regular_rule_order + 1,
                          self.outer_order + 1, self.clip_subdivision_depth)


@dataclass(frozen=True)
class InteractionPair:
    elem_a: int
    elem_b: int
    overlap_class: str
    clipped: bool


@dataclass(eq=False)
class PairSet:
    """Unordered element pairs, stored as parallel arrays sorted by (a, b)."""

    a: np.ndarray
    b: np.ndarray
    cls: np.ndarray
    clipped: np.ndarray
    dist: np.ndarray

    def __len__(self):
        return len(self.a)

    def __iter__(self):
        for i in range(len(self.a)):
            yield InteractionPair(int(self.a[i]), int(self.b[i]),
                                  CLASS_NAMES[self.cls[i]], bool(self.clipped[i]))

    def counts(self):
        return {CLASS_NAMES[c]: int(np.sum(self.cls == c)) for c in range(4)}

    def subset(self, mask):
        return PairSet(self.a[mask], self.b[mask], self.cls[mask],
                       self.clipped[mask], self.dist[mask])


def enumerate_element_pairs(mesh, elements, delta, active=None):
    """Unordered pairs from ``elements`` closer than ``delta``, at least one active.

    ``active`` defaults to ``elements``; pairs with no active element do not
    contribute to active rows and are skipped.
    """
    elements = np.unique(np.asarray(elements, dtype=np.int64))
    active = elements if active is None else np.unique(np.asarray(active, dtype=np.int64))
    a, b, dist = candidate_pairs(mesh, active, elements, delta)
    is_active = np.zeros(mesh.num_elements, dtype=bool)
    is_active[active] = True
    keep = (a <= b) | ~is_active[b]
    a, b, dist = a[keep], b[keep], dist[keep]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    order = np.lexsort((hi, lo))
    lo, hi, dist = lo[order], hi[order], dist[order]
    ea, eb = mesh.elements[lo], mesh.elements[hi]
    shared = (ea[:, :, None] == eb[:, None, :]).sum(axis=(1, 2))
    k = mesh.dim + 1
    cls = np.full(len(lo), DISJOINT, dtype=np.int8)
    cls[shared == 1] = VERTEX
    cls[(shared == 2) & (k == 3)] = EDGE
    cls[lo == hi] = IDENTICAL
    clipped = element_max_distances(mesh, lo, hi) > delta
    return PairSet(lo, hi, cls, clipped, dist)


def enumerate_pairs(partition, delta=None):
    """Interaction pairs of a :class:`DomainPartition` (rows of ``elems_N``)."""
    delta = partition.delta if delta is None else delta
    return enumerate_element_pairs(partition.mesh, partition.elems_nonlocal_space,
                                   delta, active=partition.elems_N)


def _radial_moment(p, lo, hi):
    """``int_lo^hi r**p dr`` elementwise, with the logarithmic case."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if abs(p + 1.0) < 1e-12:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(hi / lo)
    else:
        out = (hi ** (p + 1.0) - lo ** (p + 1.0)) / (p + 1.0)
    return np.where(hi > lo, out, 0.0)


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, dofs, local):
        k = dofs.shape[1]
        self.rows.append(np.repeat(dofs, k, axis=1).ravel())
        self.cols.append(np.tile(dofs, (1, k)).ravel())
        self.vals.append(local.ravel())

    def matrix(self, n):
        if not self.rows:
            return sp.csr_matrix((n, n))
        A = sp.coo_matrix((np.concatenate(self.vals),
                           (np.concatenate(self.rows), np.concatenate(self.cols))),
                          shape=(n, n)).tocsr()
        A.sum_duplicates()
        return A


def assemble_nonlocal_stiffness(partition, kernel, space="P1", quad_config=None,
                                pairs=None, elements=None, active=None):
    """Full (pre-elimination) nonlocal stiffness matrix.

    Parameters
    ----------
    partition : DomainPartition or Mesh
        With a bare mesh, ``elements`` (default all) carry the space and
        ``active`` (default ``elements``) selects the rows that are exact.
    kernel : KernelSpec
    space : {"P1", "P0"}
        Indexed by parent vertices or parent elements respectively.
    """
    qc = quad_config or QuadConfig()
    if isinstance(partition, DomainPartition):
        mesh = partition.mesh
        if pairs is None:
            pairs = enumerate_pairs(partition, kernel.delta)
    else:
        mesh = partition
        if pairs is None:
            el = np.arange(mesh.num_elements) if elements is None else elements
            pairs = enumerate_element_pairs(mesh, el, kernel.delta, active)
    if space not in ("P0", "P1"):
        raise ValueError("unknown space %r" % space)
    if space == "P0" and mesh.dim == 1 and kernel.exponent >= 2.0:
        raise ValueError("P0 in 1D needs a kernel exponent below 2")
    if space == "P0" and mesh.dim == 2 and kernel.exponent >= 3.0:
        raise ValueError("P0 in 2D needs a kernel exponent below 3")
    n = mesh.num_elements if space == "P0" else mesh.num_vertices
    trip = _Triplets()
    if mesh.dim == 1:
        _assemble_1d(mesh, pairs, kernel, space, qc, trip)
    else:
        _assemble_2d(mesh, pairs, kernel, space, qc, trip)
    return trip.matrix(n)


# --------------------------------------------------------------------------
# 1D
# --------------------------------------------------------------------------

def _merge_1d(mesh, i1, i2, cls, space):
    """Merged DOF lists and merge matrix mapping unmerged psi to merged psi."""
    if space == "P0":
        dofs = np.column_stack([i1, i2])
        return dofs, np.eye(2)
    e1, e2 = mesh.elements[i1], mesh.elements[i2]
    if cls == IDENTICAL:
        return e1, np.array([[1.0, 0], [0, 1], [1, 0], [0, 1]])
    if cls == VERTEX:
        return (np.column_stack([e1[:, 0], e1[:, 1], e2[:, 1]]),
                np.array([[1.0, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 1]]))
    return np.column_stack([e1, e2]), np.eye(4)


def _z_nodes_1d(a1, b1, a2, b2, delta, beta, m, qc):
    """Flattened z quadrature for ``int z**(-beta) P(z) dz`` per pair.

    Returns (pair index, z, weight) where the weight already includes
    ``z**(-beta)``. Pieces starting at z = 0 use Gauss-Jacobi with weight
    ``z**(m - beta)`` and compensate ``z**(-m)``.
    """
    npair = len(a1)
    lo = np.maximum(a2 - b1, 0.0)
    hi = np.minimum(b2 - a1, delta)
    bp = np.column_stack([a2 - b1, a2 - a1, b2 - b1, b2 - a1, np.full(npair, delta)])
    bp = np.sort(np.clip(bp, lo[:, None], hi[:, None]), axis=1)
    bp = np.column_stack([lo, bp, hi])
    bp = np.sort(bp, axis=1)
    zl = bp[:, :-1].ravel()
    zr = bp[:, 1:].ravel()
    pid = np.repeat(np.arange(npair), bp.shape[1] - 1)
    live = zr > zl * (1.0 + 1e-14) + 1e-300
    zl, zr, pid = zl[live], zr[live], pid[live]
    out_p, out_z, out_w = [], [], []
    at0 = zl <= 0.0
    if np.any(at0):
        t, w = gauss_jacobi01(qc.singular_rule_order, m - beta)
        L = zr[at0]
        z = L[:, None] * t[None]
        wz = (L ** (m - beta + 1.0))[:, None] * w[None] * z ** (-m)
        out_p.append(np.repeat(pid[at0], len(t)))
        out_z.append(z.ravel())
        out_w.append(wz.ravel())
    rest = ~at0
    if np.any(rest):
        zl0, zr0, p0 = zl[rest], zr[rest], pid[rest]
        nsplit = np.maximum(1, np.ceil(np.log2(zr0 / zl0) - 1e-12)).astype(int)
        idx = np.repeat(np.arange(len(zl0)), nsplit)
        j = np.arange(len(idx)) - np.repeat(np.cumsum(nsplit) - nsplit, nsplit)
        ratio = (zr0 / zl0) ** (1.0 / nsplit)
        sl = zl0[idx] * ratio[idx] ** j
        sr = np.where(j == nsplit[idx] - 1, zr0[idx], zl0[idx] * ratio[idx] ** (j + 1))
        t, w = gauss_legendre01(qc.regular_rule_order)
        z = sl[:, None] + (sr - sl)[:, None] * t[None]
        wz = (sr - sl)[:, None] * w[None] * z ** (-beta)
        out_p.append(np.repeat(p0[idx], len(t)))
        out_z.append(z.ravel())
        out_w.append(wz.ravel())
    if not out_p:
        # every pair lies at distance delta up to rounding
        return np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0)
    return np.concatenate(out_p), np.concatenate(out_z), np.concatenate(out_w)


def _assemble_1d(mesh, pairs, kernel, space, qc, trip):
    c = mesh.element_coords[:, :, 0]
    beta = kernel.exponent
    tx, wx = gauss_legendre01(3)
    for cls in (IDENTICAL, VERTEX, DISJOINT):
        if space == "P0" and cls == IDENTICAL:
            continue
        sel = np.flatnonzero(pairs.cls == cls)
        m = 2 if space == "P1" else 1
        for start in range(0, len(sel), CHUNK):
            s = sel[start:start + CHUNK]
            a, b = pairs.a[s], pairs.b[s]
            left = c[a, 0] <= c[b, 0]
            i1, i2 = np.where(left, a, b), np.where(left, b, a)
            a1, b1, a2, b2 = c[i1, 0], c[i1, 1], c[i2, 0], c[i2, 1]
            dofs, S = _merge_1d(mesh, i1, i2, cls, space)
            pid, z, wz = _z_nodes_1d(a1, b1, a2, b2, kernel.delta, beta, m, qc)
            xl = np.maximum(a1[pid], a2[pid] - z)
            xr = np.minimum(b1[pid], b2[pid] - z)
            L = np.maximum(xr - xl, 0.0)
            x = xl[:, None] + L[:, None] * tx[None]
            y = x + z[:, None]
            w = (wz * L)[:, None] * wx[None]
            if space == "P0":
                psi = np.stack([np.ones_like(x), -np.ones_like(x)], axis=-1)
            else:
                h1 = (b1 - a1)[pid][:, None]
                h2 = (b2 - a2)[pid][:, None]
                l1 = (x - a1[pid][:, None]) / h1
                l2 = (y - a2[pid][:, None]) / h2
                psi = np.stack([1.0 - l1, l1, -(1.0 - l2), -l2], axis=-1)
            psi = psi @ S
            k = psi.shape[-1]
            outer = (psi[..., :, None] * psi[..., None, :] * w[..., None, None]).sum(axis=1)
            local = np.zeros((len(s), k * k))
            for col in range(k * k):
                local[:, col] = np.bincount(pid, outer.reshape(-1, k * k)[:, col],
                                            minlength=len(s))
            trip.add(dofs, kernel.c_norm * local.reshape(len(s), k, k))


# --------------------------------------------------------------------------
# 2D
# --------------------------------------------------------------------------

def _reorder_touching(mesh, a, b, cls):
    """Vertex orderings putting the shared vertices first in both elements."""
    ea, eb = mesh.elements[a], mesh.elements[b]
    n = len(a)
    if cls == IDENTICAL:
        return ea, ea.copy()
    inb = (ea[:, :, None] == eb[:, None, :]).any(axis=2)
    if cls == EDGE:
        # shared edge in cyclic order of ea, then the free vertex
        free = np.argmin(inb, axis=1)
        t1 = np.stack([ea[np.arange(n), (free + 1) % 3], ea[np.arange(n), (free + 2) % 3],
                       ea[np.arange(n), free]], axis=1)
        rb = ~(eb[:, :, None] == ea[:, None, :]).any(axis=2)
        r2 = eb[np.arange(n), np.argmax(rb, axis=1)]
        t2 = np.column_stack([t1[:, 0], t1[:, 1], r2])
        return t1, t2
    s_pos = np.argmax(inb, axis=1)
    s = ea[np.arange(n), s_pos]
    t1 = np.stack([s, ea[np.arange(n), (s_pos + 1) % 3], ea[np.arange(n), (s_pos + 2) % 3]], axis=1)
    sb = np.argmax(eb == s[:, None], axis=1)
    t2 = np.stack([s, eb[np.arange(n), (sb + 1) % 3], eb[np.arange(n), (sb + 2) % 3]], axis=1)
    return t1, t2


def _touching_2d(mesh, pairs, kernel, space, qc, trip):
    adj = {IDENTICAL: "identical", EDGE: "edge", VERTEX: "vertex"}
    beta = kernel.exponent
    V = mesh.vertices
    for cls in (IDENTICAL, EDGE, VERTEX):
        if space == "P0" and cls == IDENTICAL:
            continue
        sel = np.flatnonzero(pairs.cls == cls)
        if len(sel) == 0:
            continue
        p, q, w = sauter_schwab(qc.singular_rule_order, adj[cls], 2)
        p1, p2, q1, q2 = p[:, 0], p[:, 1], q[:, 0], q[:, 1]
        if space == "P0":
            W = np.stack([np.ones_like(p1), -np.ones_like(p1)], axis=1)
            ex = 4.0 - beta
        else:
            W0 = (q1 + q2) - (p1 + p2)
            if cls == IDENTICAL:
                W = np.stack([W0, p1 - q1, p2 - q2], axis=1)
            elif cls == EDGE:
                W = np.stack([W0, p1 - q1, p2, -q2], axis=1)
            else:
                W = np.stack([W0, p1, p2, -q1, -q2], axis=1)
            ex = 6.0 - beta
        WW = W[:, :, None] * W[:, None, :]
        half = 0.5 if cls == IDENTICAL else 1.0
        for start in range(0, len(sel), CHUNK // 8):
            s = sel[start:start + CHUNK // 8]
            t1, t2 = _reorder_touching(mesh, pairs.a[s], pairs.b[s], cls)
            J1 = np.stack([V[t1[:, 1]] - V[t1[:, 0]], V[t1[:, 2]] - V[t1[:, 0]]], axis=2)
            J2 = np.stack([V[t2[:, 1]] - V[t2[:, 0]], V[t2[:, 2]] - V[t2[:, 0]]], axis=2)
            D = np.einsum("eij,qj->eqi", J1, p) - np.einsum("eij,qj->eqi", J2, q)
            r = np.linalg.norm(D, axis=2)
            u = np.minimum(1.0, kernel.delta / r)
            f = w[None] * r ** (-beta) * u ** ex / ex
            det = np.abs(np.linalg.det(J1) * np.linalg.det(J2))
            local = np.einsum("eq,qij->eij", f, WW) * (half * kernel.c_norm * det)[:, None, None]
            if space == "P0":
                dofs = np.column_stack([pairs.a[s], pairs.b[s]])
            elif cls == IDENTICAL:
                dofs = t1
            elif cls == EDGE:
                dofs = np.column_stack([t1, t2[:, 2]])
            else:
                dofs = np.column_stack([t1, t2[:, 1:]])
            trip.add(dofs, local)


def _bary_grad(c):
    """Barycentric gradients (n, 3, 2) and an evaluator for triangles ``c``."""
    J = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=2)
    Jinv = np.linalg.inv(J)
    G = np.concatenate([-Jinv.sum(axis=1, keepdims=True), Jinv], axis=1)
    return G


def _polar_inner(x, V, kernel, n_theta):
    """Angular sums for ``int_{K2 cap B(x, delta)} r**k e^(j) gamma dy``.

    ``x`` has shape (M, 2), ``V`` (M, 3, 2) with ``x`` outside the triangle.
    Returns ``S0`` (M,), ``S1`` (M, 2), ``S2`` (M, 2, 2) such that
    ``int gamma = S0``, ``int (y - x) gamma = S1`` and
    ``int (y - x)(y - x)^T gamma = S2``.
    """
    M = len(x)
    delta = kernel.delta
    beta = kernel.exponent
    d = V - x[:, None, :]
    cen = d.mean(axis=1)
    phic = np.arctan2(cen[:, 1], cen[:, 0])
    ang = np.arctan2(d[..., 1], d[..., 0]) - phic[:, None]
    ang = (ang + np.pi) % (2.0 * np.pi) - np.pi
    order = np.argsort(ang, axis=1)
    rows = np.arange(M)[:, None]
    ang = ang[rows, order]
    d = d[rows, order]
    lo, mid, hi = d[:, 0], d[:, 1], d[:, 2]

    def line(A, B):
        t = B - A
        nrm = np.stack([t[:, 1], -t[:, 0]], axis=1)
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        pd = np.einsum("ij,ij->i", nrm, A)
        flip = pd < 0
        nrm[flip] *= -1.0
        pd = np.abs(pd)
        om = np.arctan2(nrm[:, 1], nrm[:, 0]) - phic
        om = (om + np.pi) % (2.0 * np.pi) - np.pi
        return pd, om

    p_lm, w_lm = line(lo, mid)
    p_mh, w_mh = line(mid, hi)
    p_lh, w_lh = line(lo, hi)
    # e02 is the entry edge when x and the middle vertex lie on opposite sides of it
    t02 = hi - lo
    side_mid = t02[:, 0] * (mid[:, 1] - lo[:, 1]) - t02[:, 1] * (mid[:, 0] - lo[:, 0])
    side_x = t02[:, 0] * (-lo[:, 1]) - t02[:, 1] * (-lo[:, 0])
    e02_entry = side_mid * side_x < 0
    cuts = [ang]
    for pd, om in ((p_lm, w_lm), (p_mh, w_mh), (p_lh, w_lh)):
        ok = pd < delta
        ac = np.arccos(np.minimum(pd / delta, 1.0))
        for sgn in (-1.0, 1.0):
            c = om + sgn * ac
            c = (c + np.pi) % (2.0 * np.pi) - np.pi
            cuts.append(np.where(ok, c, ang[:, 0])[:, None])
    bp = np.clip(np.concatenate(cuts, axis=1), ang[:, :1], ang[:, 2:])
    bp.sort(axis=1)
    t, wt = gauss_legendre01(n_theta)
    th = bp[:, :-1, None] + (bp[:, 1:] - bp[:, :-1])[:, :, None] * t
    wth = (bp[:, 1:] - bp[:, :-1])[:, :, None] * wt
    th = th.reshape(M, -1)
    wth = wth.reshape(M, -1)
    first = th < ang[:, 1:2]

    def ray(pd, om):
        return pd[:, None] / np.cos(th - om[:, None])

    r_a = np.where(first, ray(p_lm, w_lm), ray(p_mh, w_mh))
    r_b = ray(p_lh, w_lh)
    r_in = np.where(e02_entry[:, None], r_b, r_a)
    r_out = np.where(e02_entry[:, None], r_a, r_b)
    r_hi = np.minimum(r_out, delta)
    r_lo = np.minimum(r_in, r_hi)
    m0 = _radial_moment(1.0 - beta, r_lo, r_hi) * wth
    m1 = _radial_moment(2.0 - beta, r_lo, r_hi) * wth
    m2 = _radial_moment(3.0 - beta, r_lo, r_hi) * wth
    tha = th + phic[:, None]
    ct, st = np.cos(tha), np.sin(tha)
    S0 = m0.sum(axis=1)
    S1 = np.stack([(m1 * ct).sum(1), (m1 * st).sum(1)], axis=1)
    S2 = np.empty((M, 2, 2))
    S2[:, 0, 0] = (m2 * ct * ct).sum(1)
    S2[:, 1, 1] = (m2 * st * st).sum(1)
    S2[:, 0, 1] = S2[:, 1, 0] = (m2 * ct * st).sum(1)
    c = kernel.c_norm
    return c * S0, c * S1, c * S2


def _outer_rule(qc, clipped):
    p, w = triangle_rule(qc.outer_order)
    if clipped and qc.clip_subdivision_depth > 0:
        p, w = subdivide_reference(p, w, qc.clip_subdivision_depth)
    return p, w


def _disjoint_2d(mesh, pairs, kernel, space, qc, trip):
    V = mesh.element_coords
    vol = mesh.volumes
    sel = np.flatnonzero(pairs.cls == DISJOINT)
    if len(sel) == 0:
        return
    tensor = ~pairs.clipped[sel] & (kernel.exponent == 0.0)
    _tensor_2d(mesh, pairs, sel[tensor], kernel, space, trip)
    polar = sel[~tensor]
    for clipped in (False, True):
        grp = polar[pairs.clipped[polar] == clipped]
        if len(grp) == 0:
            continue
        p, w = _outer_rule(qc, clipped)
        lam = np.column_stack([1.0 - p[:, 0] - p[:, 1], p[:, 0], p[:, 1]])
        nq = len(w)
        step = max(1, CHUNK * 4 // nq)
        for start in range(0, len(grp), step):
            s = grp[start:start + step]
            a, b = pairs.a[s], pairs.b[s]
            n = len(s)
            x = np.einsum("qk,ekd->eqd", lam, V[a]).reshape(-1, 2)
            wx = (2.0 * vol[a])[:, None] * w[None]
            V2 = np.repeat(V[b], nq, axis=0)
            S0, S1, S2 = _polar_inner(x, V2, kernel, qc.regular_rule_order)
            S0 = S0.reshape(n, nq) * wx
            S1 = S1.reshape(n, nq, 2) * wx[..., None]
            S2 = S2.reshape(n, nq, 2, 2) * wx[..., None, None]
            if space == "P0":
                local = S0.sum(axis=1)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
                trip.add(np.column_stack([a, b]), local)
                continue
            G2 = _bary_grad(V[b])
            # affine extension of K2's basis to the outer nodes
            phi2 = 1.0 / 3.0 + np.einsum("ekd,eqd->eqk", G2,
                                         x.reshape(n, nq, 2) - mesh.centroids[b][:, None])
            aa = np.concatenate([np.broadcast_to(lam, (n, nq, 3)), -phi2], axis=2)
            Bv = np.einsum("ekd,eqd->eqk", G2, S1)
            local = np.einsum("eq,eqi,eqj->eij", S0, aa, aa)
            cross = np.zeros((n, 6, 6))
            cross[:, :, 3:] = -np.einsum("eqi,eqk->eik", aa, Bv)
            local += cross + cross.transpose(0, 2, 1)
            local[:, 3:, 3:] += np.einsum("ekd,eqdf,elf->ekl", G2, S2, G2)
            trip.add(np.column_stack([mesh.elements[a], mesh.elements[b]]), local)


def _tensor_2d(mesh, pairs, sel, kernel, space, trip, n=3):
    if len(sel) == 0:
        return
    V = mesh.element_coords
    vol = mesh.volumes
    p, w = triangle_rule(n)
    lam = np.column_stack([1.0 - p[:, 0] - p[:, 1], p[:, 0], p[:, 1]])
    for start in range(0, len(sel), CHUNK):
        s = sel[start:start + CHUNK]
        a, b = pairs.a[s], pairs.b[s]
        x = np.einsum("qk,ekd->eqd", lam, V[a])
        y = np.einsum("qk,ekd->eqd", lam, V[b])
        r = np.linalg.norm(x[:, :, None] - y[:, None, :], axis=3)
        g = kernel.radial(r) * (4.0 * vol[a] * vol[b])[:, None, None] * w[None, :, None] * w[None, None, :]
        if space == "P0":
            tot = g.sum(axis=(1, 2))
            trip.add(np.column_stack([a, b]), tot[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]]))
            continue
        gx = g.sum(axis=2)
        gy = g.sum(axis=1)
        local = np.zeros((len(s), 6, 6))
        local[:, :3, :3] = np.einsum("eq,qi,qj->eij", gx, lam, lam)
        local[:, 3:, 3:] = np.einsum("eq,qi,qj->eij", gy, lam, lam)
        local[:, :3, 3:] = -np.einsum("exy,xi,yj->eij", g, lam, lam)
        local[:, 3:, :3] = local[:, :3, 3:].transpose(0, 2, 1)
        trip.add(np.column_stack([mesh.elements[a], mesh.elements[b]]), local)


def _assemble_2d(mesh, pairs, kernel, space, qc, trip):
    _touching_2d(mesh, pairs, kernel, space, qc, trip)
    _disjoint_2d(mesh, pairs, kernel, space, qc, trip)


def eliminate_volume_condition(A_full, dofs, f_full, g_values):
    """Nonlocal block system on ``I_N`` coupled to ``I_NI``, data on ``I_gI``."""
    return eliminate(A_full, f_full, dofs.I_N, dofs.I_NI, dofs.I_gI, g_values)
