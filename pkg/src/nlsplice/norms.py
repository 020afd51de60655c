"""Finite element functions, point evaluation and error norms."""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .quadrature import gauss_legendre01, subdivide_reference, triangle_rule

NORMS = ("L1", "L2", "Linf")


def _barycentric(mesh, elems, pts):
    c = mesh.element_coords[elems]
    if mesh.dim == 1:
        a, b = c[:, 0, 0], c[:, 1, 0]
        t = (pts[:, 0] - a) / (b - a)
        return np.column_stack([1 - t, t])
    T = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=2)
    lam = np.linalg.solve(T, (pts - c[:, 0])[..., None])[..., 0]
    return np.column_stack([1 - lam.sum(axis=1), lam])


def locate(mesh, pts, elements=None, tol=1e-10, k=12):
    """Element containing each point (``-1`` if none) and its barycentric coordinates."""
    pts = np.asarray(pts, dtype=float).reshape(-1, mesh.dim)
    elems = np.arange(mesh.num_elements) if elements is None else np.asarray(elements)
    owner = -np.ones(len(pts), dtype=np.int64)
    bary = np.zeros((len(pts), mesh.dim + 1))
    if len(elems) == 0 or len(pts) == 0:
        return owner, bary
    tree = cKDTree(mesh.centroids[elems])
    kk = min(k, len(elems))
    _, cand = tree.query(pts, k=kk)
    cand = cand.reshape(len(pts), kk)
    todo = np.arange(len(pts))
    for j in range(kk):
        if len(todo) == 0:
            break
        e = elems[cand[todo, j]]
        lam = _barycentric(mesh, e, pts[todo])
        hit = np.all(lam >= -tol, axis=1)
        owner[todo[hit]] = e[hit]
        bary[todo[hit]] = lam[hit]
        todo = todo[~hit]
    # brute force for points far from every nearby centroid
    for i in todo:
        lam = _barycentric(mesh, elems, np.repeat(pts[i:i + 1], len(elems), axis=0))
        hit = np.flatnonzero(np.all(lam >= -tol, axis=1))
        if len(hit):
            owner[i] = elems[hit[0]]
            bary[i] = lam[hit[0]]
    return owner, bary


@dataclass(eq=False)
class FEFunction:
    """P1 (vertex values) or P0 (element values) function on ``mesh``.

    ``elements`` restricts the support; evaluation outside it gives NaN.
    """

    mesh: object
    values: np.ndarray
    space: str = "P1"
    elements: np.ndarray = None

    def __call__(self, pts):
        owner, bary = locate(self.mesh, pts, self.elements)
        out = np.full(len(owner), np.nan)
        ok = owner >= 0
        v = np.asarray(self.values, dtype=float)
        if self.space == "P0":
            out[ok] = v[owner[ok]]
        else:
            out[ok] = np.einsum("ij,ij->i", bary[ok], v[self.mesh.elements[owner[ok]]])
        return out


@dataclass(eq=False)
class CompositeFunction:
    """Piecewise combination: the first part defined at a point wins."""

    parts: tuple

    def __call__(self, pts):
        out = None
        for p in self.parts:
            v = p(pts)
            out = v if out is None else np.where(np.isnan(out), v, out)
        return out


def _simplex_norm(vols, V, norm, d):
    """Norm contributions of a linear function with vertex values ``V`` per simplex."""
    if norm == "Linf":
        return np.max(np.abs(V), axis=1)
    if norm == "L2":
        return vols * (np.sum(V ** 2, axis=1) + np.sum(V, axis=1) ** 2) / ((d + 1) * (d + 2))
    if norm != "L1":
        raise ValueError("unknown norm %r" % norm)
    mean = V.mean(axis=1)
    pos = np.sum(V > 0, axis=1)
    neg = np.sum(V < 0, axis=1)
    out = vols * np.abs(mean)
    mixed = (pos > 0) & (neg > 0)
    for i in np.flatnonzero(mixed):
        v = V[i]
        lone = np.argmax(v) if pos[i] == 1 else np.argmin(v)
        a = v[lone]
        others = np.delete(v, lone)
        # integral of v over the corner simplex at the lone vertex
        corner = vols[i] * np.prod(a / (a - others)) * a / (d + 1)
        out[i] = abs(2 * corner - vols[i] * mean[i])
    return out


def _finish(parts, norm):
    if norm == "Linf":
        return float(np.max(parts)) if len(parts) else 0.0
    total = float(np.sum(parts))
    return np.sqrt(total) if norm == "L2" else total


def nested_vertex_values(fun, mesh, elements, shrink=1e-6):
    """Per-element vertex values of ``fun`` assuming it is linear on each element.

    Values are taken at points pulled slightly toward the centroid and
    extrapolated back, so discontinuities across element faces are respected.
    """
    c = mesh.element_coords[elements]
    cen = c.mean(axis=1)
    ne, nv, d = c.shape
    inner = (1 - shrink) * c + shrink * cen[:, None, :]
    vin = fun(inner.reshape(-1, d)).reshape(ne, nv)
    vc = fun(cen)
    return (vin - shrink * vc[:, None]) / (1 - shrink)


def error_norm(u, ref, norm="L2", mesh=None, elements=None, order=5, subdivide=0):
    """Norm of ``u - ref`` over a set of elements.

    Parameters
    ----------
    u : callable
        Typically an :class:`FEFunction` or :class:`CompositeFunction`.
    ref : callable, FEFunction or None
        ``None`` measures ``u`` itself.
    mesh, elements
        Integration mesh and elements. When ``ref`` is a P1 :class:`FEFunction`
        they default to its mesh and the integration is exact provided ``u``
        is linear on every element of that mesh (nested meshes). Otherwise a
        Gauss rule of degree ``order`` on ``subdivide`` levels of element
        refinement is used.
    """
    if norm not in NORMS:
        raise ValueError("unknown norm %r" % norm)
    exact = mesh is None and isinstance(ref, FEFunction) and ref.space == "P1"
    if mesh is None:
        mesh = ref.mesh if isinstance(ref, FEFunction) else u.mesh
    elems = np.arange(mesh.num_elements) if elements is None else np.asarray(elements)
    if len(elems) == 0:
        raise ValueError("empty integration region")
    d = mesh.dim
    if exact:
        V = nested_vertex_values(u, mesh, elems)
        V = V - ref.values[mesh.elements[elems]]
        if np.any(np.isnan(V)):
            raise ValueError("function undefined on part of the region")
        return _finish(_simplex_norm(mesh.volumes[elems], V, norm, d), norm)
    n = (order + 2) // 2
    if d == 1:
        t, w = gauss_legendre01(n)
        m = 2 ** subdivide
        t = ((np.arange(m)[:, None] + t[None, :]) / m).ravel()
        w = np.tile(w / m, m)
        ref_pts = np.column_stack([1 - t, t])
    else:
        p, w = triangle_rule(n)
        if subdivide:
            p, w = subdivide_reference(p, w, subdivide)
        ref_pts = np.column_stack([1 - p.sum(axis=1), p])
    X = np.einsum("qi,eid->eqd", ref_pts, mesh.element_coords[elems]).reshape(-1, d)
    diff = u(X)
    if ref is not None:
        diff = diff - ref(X if d > 1 or isinstance(ref, (FEFunction, CompositeFunction)) else X[:, 0])
    diff = diff.reshape(len(elems), -1)
    if np.any(np.isnan(diff)):
        raise ValueError("function undefined on part of the region")
    if norm == "Linf":
        return float(np.max(np.abs(diff)))
    p = 2 if norm == "L2" else 1
    parts = (np.abs(diff) ** p) @ w * (mesh.volumes[elems] / w.sum())
    return _finish(parts, norm)
