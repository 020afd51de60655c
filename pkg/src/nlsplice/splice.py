"""Splice coupling: one square system built row-by-row from two discretizations.

Rows of local DOFs come from the eliminated local system, rows of nonlocal
DOFs from the eliminated nonlocal system. The values each subproblem needs
from the other (interface values for the local problem, collar values for
the nonlocal problem) are unknowns of the other block, which makes the
combined matrix square and generally non-symmetric.
"""
import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly_local import (assemble_load, assemble_local_stiffness,
                             eliminate_local_bc, interpolate)
from .assembly_nonlocal import assemble_nonlocal_stiffness, eliminate_volume_condition


def selection_matrix(idx, n):
    """Sparse matrix whose rows pick the entries ``idx`` of a length-``n`` vector."""
    idx = np.asarray(idx, dtype=np.int64)
    return sp.csr_matrix((np.ones(len(idx)), (np.arange(len(idx)), idx)), shape=(len(idx), n))


@dataclass(eq=False)
class Restrictions:
    R_L: sp.csr_matrix
    R_N: sp.csr_matrix
    R_Gamma: sp.csr_matrix
    R_NI: sp.csr_matrix


def build_restrictions(dofs):
    """Row-selection operators from the global ordering ``[I_L ; I_N]``."""
    n, n_L = dofs.n, dofs.n_L
    gg = np.asarray(dofs.gamma_global)
    ng = np.asarray(dofs.ni_global)
    if np.any((gg < n_L) | (gg >= n)) or np.any((ng < 0) | (ng >= n_L)):
        raise ValueError("interface or collar DOF without a matching global DOF")
    return Restrictions(R_L=selection_matrix(np.arange(n_L), n),
                        R_N=selection_matrix(np.arange(n_L, n), n),
                        R_Gamma=selection_matrix(gg, n),
                        R_NI=selection_matrix(ng, n))


@dataclass(eq=False)
class SpliceSystem:
    A_S: sp.csr_matrix
    h_S: np.ndarray
    restrictions: Restrictions
    local: object
    nonlocal_: object
    dofs: object = None
    timings: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A_S.shape[0]


def assemble_splice(local_blocks, nonlocal_blocks, restrictions, dofs=None):
    """``A_S`` and ``h_S`` from the eliminated local and nonlocal block systems."""
    R = restrictions
    n = R.R_L.shape[1]
    if local_blocks.A_II.shape[0] != R.R_L.shape[0] or \
            nonlocal_blocks.A_II.shape[0] != R.R_N.shape[0]:
        raise ValueError("block sizes do not match the restrictions")
    if local_blocks.A_IC.shape[1] != R.R_Gamma.shape[0] or \
            nonlocal_blocks.A_IC.shape[1] != R.R_NI.shape[0]:
        raise ValueError("coupling block sizes do not match the restrictions")
    top = local_blocks.A_II @ R.R_L + local_blocks.A_IC @ R.R_Gamma
    bottom = nonlocal_blocks.A_II @ R.R_N + nonlocal_blocks.A_IC @ R.R_NI
    A_S = (R.R_L.T @ top + R.R_N.T @ bottom).tocsr()
    A_S.sort_indices()
    h_S = R.R_L.T @ local_blocks.rhs + R.R_N.T @ nonlocal_blocks.rhs
    assert A_S.shape == (n, n)
    return SpliceSystem(A_S=A_S, h_S=np.asarray(h_S), restrictions=R,
                        local=local_blocks, nonlocal_=nonlocal_blocks, dofs=dofs)


def global_operator(A_parent, dofs, side):
    """Restrict a parent-numbered operator to the global unknowns.

    ``side`` is ``"local"`` or ``"nonlocal"`` and selects which DOF space the
    parent numbering refers to. Only valid when the two spaces share DOFs
    (P1 on one parent mesh).
    """
    if dofs.nonlocal_space != "P1" or dofs.local_mesh is not dofs.nonlocal_mesh:
        raise ValueError("global operators need matching P1 spaces on one mesh")
    g = np.concatenate([dofs.I_L, dofs.I_N])
    A = sp.csr_matrix(A_parent)
    return A[g][:, g].tocsr()


def assemble_splice_alternate(A_L_full, A_N_full, restrictions):
    """``R_L^T R_L A^L + R_N^T R_N A^N`` for operators in the global ordering."""
    R = restrictions
    n = R.R_L.shape[1]
    if A_L_full.shape != (n, n) or A_N_full.shape != (n, n):
        raise ValueError("operators must be %d x %d" % (n, n))
    A = (R.R_L.T @ (R.R_L @ A_L_full) + R.R_N.T @ (R.R_N @ A_N_full)).tocsr()
    A.sort_indices()
    return A


@dataclass(eq=False)
class SpliceSolution:
    u: np.ndarray
    u_L: np.ndarray
    u_N: np.ndarray
    residual: float
    method: str


def solve_splice(system, method="direct", tol=1e-12, g_local=None, g_nonlocal=None):
    """Solve ``A_S u = h_S`` and unpack both overlapping FE functions.

    ``method="gmres"`` uses restarted GMRES with an incomplete LU
    preconditioner and raises if it does not converge.
    """
    A, h = system.A_S, system.h_S
    if method == "gmres":
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
        Mop = spla.LinearOperator(A.shape, ilu.solve)
        u, info = spla.gmres(A, h, M=Mop, rtol=tol, restart=100, maxiter=2000)
        if info != 0:
            raise RuntimeError("GMRES did not converge (info=%d)" % info)
    elif method == "direct":
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise RuntimeError("splice matrix is singular: %s" % exc) from None
        u = lu.solve(h)
    else:
        raise ValueError("unknown method %r" % method)
    hn = np.linalg.norm(h)
    res = np.linalg.norm(A @ u - h) / (hn if hn > 0 else 1.0)
    u_L, u_N = unpack(system, u, g_local, g_nonlocal)
    return SpliceSolution(u=u, u_L=u_L, u_N=u_N, residual=res, method=method)


def unpack(system, u, g_local=None, g_nonlocal=None):
    """Scatter global unknowns into the local and nonlocal coefficient vectors.

    Entries outside the respective subdomain meshes are NaN.
    """
    d = system.dofs
    u_L = np.full(d.n_local_space, np.nan)
    u_L[d.I_L] = u[:d.n_L]
    u_L[d.I_Gamma] = u[d.gamma_global]
    u_L[d.I_GammaGiven] = system.local.g if g_local is None else g_local
    u_N = np.full(d.n_nonlocal_space, np.nan)
    u_N[d.I_N] = u[d.n_L:]
    u_N[d.I_NI] = u[d.ni_global]
    u_N[d.I_gI] = system.nonlocal_.g if g_nonlocal is None else g_nonlocal
    return u_L, u_N


def patch_test_residual(system, u_star):
    """``max |A_S u* - h_S|`` for the interpolant of ``u_star`` at the global DOFs."""
    ubar = interpolate(system.dofs.coords, u_star)
    return float(np.max(np.abs(system.A_S @ ubar - system.h_S)))


def smallest_singular_value(A):
    """Smallest singular value and 2-norm of a small sparse matrix (dense SVD)."""
    s = np.linalg.svd(A.toarray(), compute_uv=False)
    return s[-1], s[0]


def write_spy_csv(path, A):
    """Nonzero pattern as ``row,col,value`` lines."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "value"])
        for i in order:
            w.writerow([int(C.row[i]), int(C.col[i]), repr(float(C.data[i]))])


def build_subproblems(dofs, partition, kernel, f, g, quad_config=None,
                      singular_points=(), nonlocal_matrix=None, local_matrix=None):
    """Assemble and eliminate both subproblems.

    ``f`` and ``g`` are callables of the point coordinates; ``g`` supplies
    local boundary data and nonlocal volume data. Precomputed parent
    operators may be passed to skip assembly.
    """
    lm = dofs.local_mesh
    A_L = local_matrix if local_matrix is not None else \
        assemble_local_stiffness(lm, dofs.local_elements)
    b_L = assemble_load(lm, f, "P1", dofs.local_elements, singular_points=singular_points)
    local = eliminate_local_bc(A_L, dofs, b_L, interpolate(lm.vertices[dofs.I_GammaGiven], g)
                               if len(dofs.I_GammaGiven) else np.zeros(0))
    space = dofs.nonlocal_space
    A_N = nonlocal_matrix if nonlocal_matrix is not None else \
        assemble_nonlocal_stiffness(partition, kernel, space, quad_config)
    b_N = assemble_load(dofs.nonlocal_mesh, f, space, partition.elems_N,
                        singular_points=singular_points)
    gI = dofs.nonlocal_coords[dofs.I_gI]
    nonloc = eliminate_volume_condition(A_N, dofs, b_N,
                                          interpolate(gI, g) if len(gI) else np.zeros(0))
    return local, nonloc


def build_splice_system(dofs, partition, kernel, f, g, quad_config=None,
                        singular_points=(), nonlocal_matrix=None):
    local, nonloc = build_subproblems(dofs, partition, kernel, f, g, quad_config,
                                        singular_points, nonlocal_matrix)
    return assemble_splice(local, nonloc, build_restrictions(dofs), dofs)
