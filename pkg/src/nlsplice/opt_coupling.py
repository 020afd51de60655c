"""Optimization-based coupling used as an independent check of the splice.

The local problem is driven by interface controls ``theta_L`` (values on
``I_Gamma``), the nonlocal problem by collar controls ``theta_N`` (values on
``I_NI``). The controls minimize

    J = 1/2 e^T M_b e,    e = u_N - u_L on the overlap DOFs,

where the overlap DOFs are ``I_Gamma`` and ``I_NI`` and ``M_b`` is a (lumped
or consistent) local mass matrix restricted to them.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .assembly_local import assemble_mass


@dataclass(eq=False)
class OptResult:
    theta_L: np.ndarray
    theta_N: np.ndarray
    u_L: np.ndarray
    u_N: np.ndarray
    J: float
    iterations: int
    method: str
    grad_norm: float
    history: list = field(default_factory=list)

    @property
    def u(self):
        """Global vector ``[u_L on I_L ; u_N on I_N]``."""
        return np.concatenate([self.u_L, self.u_N])


def overlap_mass(dofs, metric="lumped"):
    """Dense ``M_b`` on ``[I_Gamma ; I_NI]`` taken from the local P1 mass matrix."""
    M = assemble_mass(dofs.local_mesh, "P1", dofs.local_elements).tocsr()
    ov = np.concatenate([dofs.I_Gamma, np.asarray(dofs.I_L)[dofs.ni_global]])
    if metric == "lumped":
        return np.diag(np.asarray(M.sum(axis=1)).ravel()[ov])
    if metric == "consistent":
        return M[ov][:, ov].toarray()
    raise ValueError("unknown overlap metric %r" % metric)


class OptCoupling:
    """Objective, gradient and minimizers for given eliminated subproblems.

    Parameters
    ----------
    local, nonlocal_ : BlockedSystem
        Eliminated local system on ``I_L`` coupled to ``I_Gamma`` and
        nonlocal system on ``I_N`` coupled to ``I_NI``; their right-hand sides
        carry the forcing and the boundary/volume data.
    dofs : DofPartition
    metric : {"lumped", "consistent"}
    """

    def __init__(self, local, nonlocal_, dofs, metric="lumped"):
        self.local = local
        self.nonlocal_ = nonlocal_
        self.dofs = dofs
        self.metric = metric
        self.M_b = overlap_mass(dofs, metric)
        self.lu_L = spla.splu(local.A_II.tocsc())
        self.lu_N = spla.splu(nonlocal_.A_II.tocsc())
        self.rhs_L = local.rhs
        self.rhs_N = nonlocal_.rhs
        self.n_G = len(dofs.I_Gamma)
        self.n_NI = len(dofs.I_NI)
        # position of each interface DOF inside I_N, of each collar DOF inside I_L
        self.gpos = np.asarray(dofs.gamma_global) - dofs.n_L
        self.npos = np.asarray(dofs.ni_global)

    @property
    def n_controls(self):
        return self.n_G + self.n_NI

    def split_controls(self, theta):
        theta = np.asarray(theta, dtype=float)
        return theta[:self.n_G], theta[self.n_G:]

    def solve_local(self, theta_L, rhs=None):
        r = self.rhs_L if rhs is None else rhs
        return self.lu_L.solve(r - self.local.A_IC @ theta_L)

    def solve_nonlocal(self, theta_N, rhs=None):
        r = self.rhs_N if rhs is None else rhs
        return self.lu_N.solve(r - self.nonlocal_.A_IC @ theta_N)

    def mismatch(self, theta):
        tL, tN = self.split_controls(theta)
        u_L = self.solve_local(tL)
        u_N = self.solve_nonlocal(tN)
        e = np.concatenate([u_N[self.gpos] - tL, tN - u_L[self.npos]])
        return e, u_L, u_N

    def objective(self, theta):
        e, _, _ = self.mismatch(theta)
        return 0.5 * float(e @ self.M_b @ e)

    def gradient(self, theta):
        """Adjoint gradient: one transposed solve per subproblem."""
        e, _, _ = self.mismatch(theta)
        r = self.M_b @ e
        r_G, r_NI = r[:self.n_G], r[self.n_G:]
        # local sensitivity of -u_L[npos] is +A_LL^{-1} A_LG
        zL = np.zeros(self.local.A_II.shape[0])
        np.add.at(zL, self.npos, r_NI)
        g_L = -r_G + self.local.A_IC.T @ self.lu_L.solve(zL, trans="T")
        zN = np.zeros(self.nonlocal_.A_II.shape[0])
        np.add.at(zN, self.gpos, r_G)
        g_N = r_NI - self.nonlocal_.A_IC.T @ self.lu_N.solve(zN, trans="T")
        return np.concatenate([g_L, g_N])

    def value_and_gradient(self, theta):
        return self.objective(theta), self.gradient(theta)

    def affine_map(self):
        """``(B, c)`` with ``e(theta) = B theta + c``, built column by column."""
        c, _, _ = self.mismatch(np.zeros(self.n_controls))
        B = np.empty((self.n_controls, self.n_controls))
        zero_L = np.zeros_like(self.rhs_L)
        zero_N = np.zeros_like(self.rhs_N)
        for k in range(self.n_G):
            t = np.zeros(self.n_G)
            t[k] = 1.0
            uL = self.solve_local(t, zero_L)
            col = np.zeros(self.n_controls)
            col[k] = -1.0
            col[self.n_G:] = -uL[self.npos]
            B[:, k] = col
        for k in range(self.n_NI):
            t = np.zeros(self.n_NI)
            t[k] = 1.0
            uN = self.solve_nonlocal(t, zero_N)
            col = np.zeros(self.n_controls)
            col[:self.n_G] = uN[self.gpos]
            col[self.n_G + k] = 1.0
            B[:, self.n_G + k] = col
        return B, c

    def minimize(self, method="exact_quadratic", gtol=1e-12, maxiter=200):
        if method == "exact_quadratic":
            B, c = self.affine_map()
            if self.metric == "lumped":
                W = np.sqrt(np.diag(self.M_b))[:, None]
                theta = np.linalg.lstsq(W * B, -(W[:, 0] * c), rcond=None)[0]
            else:
                Lc = np.linalg.cholesky(self.M_b).T
                theta = np.linalg.lstsq(Lc @ B, -(Lc @ c), rcond=None)[0]
            it, hist = 1, []
        elif method == "quasi_newton":
            theta, it, hist = bfgs(self.value_and_gradient, np.zeros(self.n_controls),
                                   gtol=gtol, maxiter=maxiter)
        else:
            raise ValueError("unknown method %r" % method)
        e, u_L, u_N = self.mismatch(theta)
        tL, tN = self.split_controls(theta)
        return OptResult(theta_L=tL, theta_N=tN, u_L=u_L, u_N=u_N,
                         J=0.5 * float(e @ self.M_b @ e), iterations=it, method=method,
                         grad_norm=float(np.linalg.norm(self.gradient(theta))), history=hist)

    def harmonic_forcing_split(self, theta):
        """Control-driven parts ``v`` (zero forcing) and forcing parts ``w`` (zero control)."""
        tL, tN = self.split_controls(theta)
        v_L = self.solve_local(tL, np.zeros_like(self.rhs_L))
        v_N = self.solve_nonlocal(tN, np.zeros_like(self.rhs_N))
        w_L = self.lu_L.solve(self.rhs_L)
        w_N = self.lu_N.solve(self.rhs_N)
        return (v_L, w_L), (v_N, w_N)


def bfgs(fun, x0, gtol=1e-12, maxiter=200, c1=1e-4):
    """BFGS with inverse-Hessian updates and Armijo backtracking.

    ``fun`` returns ``(value, gradient)``. Stops when the gradient norm drops
    below ``gtol`` or the line search cannot decrease the objective.
    Returns ``(x, iterations, history of objective values)``.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun(x)
    H = np.eye(len(x))
    hist = [f]
    it = 0
    for it in range(1, maxiter + 1):
        if np.linalg.norm(g) <= gtol:
            it -= 1
            break
        p = -H @ g
        if p @ g >= 0:
            H = np.eye(len(x))
            p = -g
        t = 1.0
        while True:
            x_new = x + t * p
            f_new, g_new = fun(x_new)
            if f_new <= f + c1 * t * (g @ p) or t < 1e-20:
                break
            t *= 0.5
        if f_new > f:
            break
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-300:
            if it == 1:
                H = np.eye(len(x)) * (sy / (y @ y))
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
        hist.append(f)
        if f == 0.0:
            break
    return x, it, hist
