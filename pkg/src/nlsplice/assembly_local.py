"""P1/P0 finite element operators for the local (classical) diffusion problem.

All assemblers take an optional element subset so that operators for a
subdomain can be built on a parent mesh without renumbering vertices.
"""
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .quadrature import gauss_legendre01, triangle_rule


def _subset(mesh, elements):
    if elements is None:
        return np.arange(mesh.num_elements)
    return np.asarray(elements, dtype=np.int64)


def _p1_gradients(mesh, elems):
    """Constant basis gradients per element, shape (ne, d + 1, d)."""
    c = mesh.element_coords[elems]
    if mesh.dim == 1:
        h = c[:, 1, 0] - c[:, 0, 0]
        g = np.stack([-1.0 / h, 1.0 / h], axis=1)
        return g[:, :, None]
    # rows of inv(J) give gradients of barycentrics 1 and 2
    J = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=2)
    Jinv = np.linalg.inv(J)
    g12 = Jinv
    g0 = -g12.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g12], axis=1)


def _scatter(mesh, elems, local, n=None):
    el = mesh.elements[elems]
    k = el.shape[1]
    rows = np.repeat(el, k, axis=1).ravel()
    cols = np.tile(el, (1, k)).ravel()
    n = mesh.num_vertices if n is None else n
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def element_stiffness(mesh, elems=None):
    """Element stiffness matrices, shape (ne, d + 1, d + 1)."""
    elems = _subset(mesh, elems)
    g = _p1_gradients(mesh, elems)
    vol = mesh.volumes[elems]
    return np.einsum("eid,ejd,e->eij", g, g, vol)


def assemble_local_stiffness(mesh, elements=None):
    """P1 stiffness matrix ``int grad(phi_j) . grad(phi_i)`` over ``elements``.

    Returned with the full vertex numbering of ``mesh``.
    """
    elems = _subset(mesh, elements)
    return _scatter(mesh, elems, element_stiffness(mesh, elems))


def assemble_mass(mesh, space="P1", elements=None):
    """Consistent P1 mass matrix or diagonal P0 mass matrix."""
    elems = _subset(mesh, elements)
    vol = mesh.volumes[elems]
    if space == "P0":
        m = np.zeros(mesh.num_elements)
        m[elems] = vol
        return sp.diags(m).tocsr()
    if space != "P1":
        raise ValueError("unknown space %r" % space)
    k = mesh.dim + 1
    ref = (np.ones((k, k)) + np.eye(k)) / ((k + 1) * k)
    return _scatter(mesh, elems, vol[:, None, None] * ref[None])


def _element_points(mesh, elems, order):
    """Physical quadrature points, weights and P1 basis values per element."""
    c = mesh.element_coords[elems]
    vol = mesh.volumes[elems]
    if mesh.dim == 1:
        t, w = gauss_legendre01((order + 2) // 2)
        lam = np.column_stack([1.0 - t, t])
        wq = np.outer(vol, w)
    else:
        p, w = triangle_rule((order + 2) // 2)
        lam = np.column_stack([1.0 - p[:, 0] - p[:, 1], p[:, 0], p[:, 1]])
        wq = np.outer(2.0 * vol, w)
    x = np.einsum("qk,ekd->eqd", lam, c)
    return x, wq, lam


def _eval_f(f, x):
    """``f`` at points of shape (..., d); ``f`` sees a flat (n,) or (n, 2) array."""
    d = x.shape[-1]
    flat = x.reshape(-1, d)
    vals = np.asarray(f(flat[:, 0] if d == 1 else flat), dtype=float)
    vals = np.broadcast_to(vals, (len(flat),)).reshape(x.shape[:-1])
    if not np.all(np.isfinite(vals)):
        raise ValueError("forcing is not finite at a quadrature node")
    return vals


def _graded_segment(a, b, x0, n):
    """Nodes/weights on [a, b] graded toward the endpoint ``x0``."""
    t, w = gauss_legendre01(n)
    L = b - a
    s = t ** 4
    ds = 4.0 * t ** 3 * w
    if x0 == a:
        return a + L * s, L * ds
    return b - L * s, L * ds


def assemble_load(mesh, f, space="P1", elements=None, order=5, singular_points=()):
    """Load vector ``int f phi_i`` with a fixed-order rule.

    In 1D, ``singular_points`` lists locations where ``f`` has an integrable
    singularity. Elements are split there and integrated with nodes graded
    toward the point (``x = x0 + L t**4``), and all other elements use a
    10-point rule.
    """
    elems = _subset(mesh, elements)
    n_dof = mesh.num_elements if space == "P0" else mesh.num_vertices
    b = np.zeros(n_dof)
    if len(singular_points) and mesh.dim == 1:
        return _load_1d_singular(mesh, f, space, elems, singular_points, b)
    x, wq, lam = _element_points(mesh, elems, order)
    fx = _eval_f(f, x) * wq
    if space == "P0":
        b[elems] = fx.sum(axis=1)
    else:
        np.add.at(b, mesh.elements[elems], fx @ lam)
    return b


def _load_1d_singular(mesh, f, space, elems, points, b, n=10):
    c = mesh.element_coords[elems][:, :, 0]
    t, w = gauss_legendre01(n)
    for e, (a, bb) in zip(elems, c):
        cuts = [a] + sorted(p for p in points if a < p < bb) + [bb]
        xs, ws = [], []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            near = [p for p in points if abs(p - lo) < 1e-14 or abs(p - hi) < 1e-14]
            if near:
                x0 = lo if abs(near[0] - lo) < 1e-14 else hi
                xq, wqq = _graded_segment(lo, hi, x0, n)
            else:
                xq, wqq = lo + (hi - lo) * t, (hi - lo) * w
            xs.append(xq)
            ws.append(wqq)
        xq = np.concatenate(xs)
        wqq = np.concatenate(ws)
        fx = _eval_f(f, xq[:, None]) * wqq
        if space == "P0":
            b[e] += fx.sum()
        else:
            lam1 = (xq - a) / (bb - a)
            i0, i1 = mesh.elements[e]
            b[i0] += np.dot(fx, 1.0 - lam1)
            b[i1] += np.dot(fx, lam1)
    return b


def interpolate(coords, u):
    """Nodal (or centroid) interpolant of ``u`` at the given points."""
    coords = np.asarray(coords, dtype=float)
    arg = coords[:, 0] if coords.shape[1] == 1 else coords
    return np.broadcast_to(np.asarray(u(arg), dtype=float), (len(coords),)).copy()


@dataclass(eq=False)
class BlockedSystem:
    """Rows of the solved-for DOFs with the boundary blocks kept explicitly.

    ``A_II u_I + A_IC u_C = rhs`` where ``u_C`` are values supplied by the
    other subproblem and ``rhs = f_I - A_IG g``.
    """

    A_II: sp.csr_matrix
    A_IC: sp.csr_matrix
    A_IG: sp.csr_matrix
    f_I: np.ndarray
    g: np.ndarray
    interior: np.ndarray
    coupled: np.ndarray
    given: np.ndarray

    @property
    def rhs(self):
        if len(self.given) == 0:
            return self.f_I.copy()
        return self.f_I - self.A_IG @ self.g

    def solve(self, u_coupled, factor=None, rhs=None):
        """Solve ``A_II u = rhs - A_IC u_coupled``."""
        r = self.rhs if rhs is None else rhs
        if len(self.coupled):
            r = r - self.A_IC @ u_coupled
        if factor is not None:
            return factor.solve(r)
        return sp.linalg.spsolve(self.A_II.tocsc(), r)


def eliminate(A_full, f_full, interior, coupled, given, g_values):
    """Extract the blocks for ``interior`` rows.

    Raises if ``g_values`` does not have one entry per ``given`` DOF.
    """
    A = sp.csr_matrix(A_full)
    g = np.asarray(g_values, dtype=float).ravel() if g_values is not None else None
    if g is None or len(g) != len(given):
        raise ValueError("need %d boundary values, got %s"
                         % (len(given), None if g is None else len(g)))
    if not np.all(np.isfinite(g)):
        raise ValueError("boundary values must be finite")
    rows = A[interior]
    return BlockedSystem(A_II=rows[:, interior].tocsr(), A_IC=rows[:, coupled].tocsr(),
                         A_IG=rows[:, given].tocsr(),
                         f_I=np.asarray(f_full, dtype=float)[interior].copy(), g=g,
                         interior=np.asarray(interior), coupled=np.asarray(coupled),
                         given=np.asarray(given))


def eliminate_local_bc(A_full, dofs, f_full, g_values):
    """Local block system on ``I_L`` coupled to ``I_Gamma``, data on ``I_GammaGiven``."""
    return eliminate(A_full, f_full, dofs.I_L, dofs.I_Gamma, dofs.I_GammaGiven, g_values)


def export_matrix_market(path, A, comment=""):
    scipy.io.mmwrite(path, sp.coo_matrix(A), comment=comment)
