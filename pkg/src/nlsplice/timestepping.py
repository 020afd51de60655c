"""Backward Euler for ``u_t - kappa L u = f`` with fully nonlocal or spliced operators.

The fully local and fully nonlocal stiffness matrices are assembled once on
the parent mesh. A spliced operator for any window is obtained by taking
nonlocal rows at window DOFs and local rows elsewhere; with homogeneous
boundary and volume data no right-hand-side terms arise.
"""
from dataclasses import dataclass, field
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly_local import assemble_local_stiffness, assemble_mass
from .assembly_nonlocal import assemble_nonlocal_stiffness
from .kernel import make_kernel
from .mesh import Box, EmptyRegion, build_domain_partition, padded_square_mesh, refine_uniform
from .norms import FEFunction, error_norm
from .quadrature import subdivide_reference, triangle_rule

STRATEGIES = ("fully_nonlocal", "moving", "moving_with_boundary_layer", "fixed_annulus")


@dataclass
class TimeConfig:
    dt: float = 0.1
    t_end: float = 10.0
    diffusivity: float = 0.1
    window_strategy: str = "moving"
    window_halfwidth: float = 0.3
    boundary_layer_width: float = None
    fixed_outer: float = 0.8
    fixed_inner: float = 0.2

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        if self.window_strategy not in STRATEGIES:
            raise ValueError("unknown window strategy %r" % self.window_strategy)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


def ball_center(t):
    return np.array([0.5 * np.cos(t), 0.5 * np.sin(t)])


def forcing_ball(x, t, radius=0.1):
    """Indicator of the ball of radius ``radius`` around :func:`ball_center`."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x - ball_center(t), axis=-1)
    out = (r < radius).astype(float)
    return out.item() if out.ndim == 0 else out


def ball_load(mesh, center, radius, elements=None, depth=4):
    """P1 load vector of the indicator of a ball.

    Elements inside the ball are integrated exactly, elements cut by the
    rim with a subdivided Gauss rule.
    """
    elems = np.arange(mesh.num_elements) if elements is None else np.asarray(elements)
    c = mesh.element_coords[elems]
    vd = np.linalg.norm(c - center, axis=2)
    inside = np.all(vd <= radius, axis=1)
    maybe = ~inside & (np.min(vd, axis=1) < radius + mesh.diameters[elems])
    b = np.zeros(mesh.num_vertices)
    vol = mesh.volumes[elems]
    np.add.at(b, mesh.elements[elems[inside]].ravel(), np.repeat(vol[inside] / 3.0, 3))
    if np.any(maybe):
        p, w = subdivide_reference(*triangle_rule(3), depth)
        lam = np.column_stack([1 - p.sum(axis=1), p])
        cm = c[maybe]
        X = np.einsum("qi,eid->eqd", lam, cm)
        chi = (np.linalg.norm(X - center, axis=2) < radius).astype(float)
        loc = np.einsum("eq,q,qi->ei", chi, w, lam) * (2 * vol[maybe])[:, None]
        np.add.at(b, mesh.elements[elems[maybe]].ravel(), loc.ravel())
    return b


def backward_euler_step(M, A, u_n, f_vec, dt, diffusivity=0.1, lu=None):
    """Solve ``(M + diffusivity dt A) u = M u_n + dt f``.

    ``lu`` may be a prefactorized ``splu`` of the system matrix.
    """
    rhs = M @ u_n + dt * f_vec
    K = None
    if lu is None:
        K = (M + diffusivity * dt * A).tocsc()
        try:
            lu = spla.splu(K)
        except RuntimeError as exc:
            raise RuntimeError("time step matrix is singular: %s" % exc) from None
    u = lu.solve(rhs)
    if K is not None:
        nr = np.linalg.norm(rhs)
        res = np.linalg.norm(K @ u - rhs) / (nr if nr > 0 else 1.0)
        if res > 1e-10:
            raise RuntimeError("time step residual %.2e" % res)
    return u


@dataclass(eq=False)
class HeatProblem:
    """Cached parent operators restricted to the interior vertices of the square."""

    mesh: object
    delta: float
    interior: np.ndarray
    elems_omega: np.ndarray
    M: sp.csr_matrix
    A_local: sp.csr_matrix
    A_nonlocal: sp.csr_matrix
    timings: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.interior)

    def full_vector(self, u):
        out = np.zeros(self.mesh.num_vertices)
        out[self.interior] = u
        return out


def build_heat_problem(mesh, delta, kernel_name="constant", quad_config=None, half=1.0):
    t0 = time.perf_counter()
    omega = Box([-half, -half], [half, half])
    kernel = make_kernel(kernel_name, 2, delta)
    part = build_domain_partition(mesh, omega, EmptyRegion(), delta)
    interior = np.flatnonzero(omega.contains(mesh.vertices))
    A_N = assemble_nonlocal_stiffness(part, kernel, "P1", quad_config).tocsr()
    t1 = time.perf_counter()
    A_L = assemble_local_stiffness(mesh, part.elems_N).tocsr()
    M = assemble_mass(mesh, "P1", part.elems_N).tocsr()
    sel = lambda A: A[interior][:, interior].tocsr()
    return HeatProblem(mesh=mesh, delta=delta, interior=interior, elems_omega=part.elems_N,
                       M=sel(M), A_local=sel(A_L), A_nonlocal=sel(A_N),
                       timings={"assembly_nonlocal": t1 - t0,
                                "assembly_local": time.perf_counter() - t1})


def window_region(strategy, t, cfg, delta):
    """Nonlocal window at time ``t`` as a region, or ``None`` for the whole square."""
    if strategy == "fully_nonlocal":
        return None
    a = cfg.window_halfwidth
    moving = Box(ball_center(t) - a, ball_center(t) + a)
    if strategy == "moving":
        return moving
    if strategy == "moving_with_boundary_layer":
        w = delta if cfg.boundary_layer_width is None else cfg.boundary_layer_width
        layer = Box([-1.0, -1.0], [1.0, 1.0]) - Box([-1 + w, -1 + w], [1 - w, 1 - w])
        return layer | moving
    if strategy == "fixed_annulus":
        o, i = cfg.fixed_outer, cfg.fixed_inner
        return Box([-o, -o], [o, o]) - Box([-i, -i], [i, i])
    raise ValueError("unknown window strategy %r" % strategy)


def window_elements(problem, region):
    """Elements of the square whose centroid lies in ``region``."""
    e = problem.elems_omega
    if region is None:
        return e
    return e[region.closure(problem.mesh.centroids[e])]


def local_dof_mask(problem, nonlocal_elems):
    """Interior DOFs whose every adjacent element lies outside the window."""
    mesh = problem.mesh
    flag = np.zeros(mesh.num_elements)
    flag[nonlocal_elems] = 1.0
    touch = np.asarray(mesh.vertex_element_incidence @ flag).ravel() > 0
    return ~touch[problem.interior]


def spliced_operator(problem, local_mask):
    """Local rows at ``local_mask`` DOFs, nonlocal rows elsewhere."""
    dl = sp.diags(local_mask.astype(float))
    dn = sp.diags((~local_mask).astype(float))
    return (dl @ problem.A_local + dn @ problem.A_nonlocal).tocsr()


def window_outline(mesh, elems):
    """Boundary segments ``(x0, y0, x1, y1)`` of a set of triangles."""
    if len(elems) == 0:
        return np.zeros((0, 4))
    tri = mesh.elements[elems]
    edges = np.sort(np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [0, 2]]]), axis=1)
    uniq, cnt = np.unique(edges, axis=0, return_counts=True)
    b = uniq[cnt == 1]
    v = mesh.vertices
    return np.column_stack([v[b[:, 0]], v[b[:, 1]]])


@dataclass(eq=False)
class HeatRun:
    strategy: str
    times: np.ndarray
    solutions: list
    outlines: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)
    n_nonlocal: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)


def initial_condition(problem, radius=0.1):
    """L2 projection of the forcing at ``t = 0``."""
    b = ball_load(problem.mesh, ball_center(0.0), radius, problem.elems_omega)[problem.interior]
    return spla.spsolve(problem.M.tocsc(), b)


def run_heat(problem, cfg, strategy=None, forcing=True, record_outlines=False):
    """March ``cfg.n_steps`` backward Euler steps; returns a :class:`HeatRun`."""
    strategy = strategy or cfg.window_strategy
    u = initial_condition(problem)
    times, sols, outlines, n_nonlocal = [0.0], [u], [], []
    t_build = t_solve = 0.0
    lu = None
    static = strategy in ("fully_nonlocal", "fixed_annulus")
    for k in range(1, cfg.n_steps + 1):
        t = k * cfg.dt
        t0 = time.perf_counter()
        if lu is None or not static:
            elems = window_elements(problem, window_region(strategy, t, cfg, problem.delta))
            mask = local_dof_mask(problem, elems)
            A = spliced_operator(problem, mask)
            lu = spla.splu((problem.M + cfg.diffusivity * cfg.dt * A).tocsc())
            if record_outlines:
                outlines.append(window_outline(problem.mesh, elems))
        n_nonlocal.append(int(np.sum(~mask)))
        f = ball_load(problem.mesh, ball_center(t), 0.1, problem.elems_omega)[problem.interior] \
            if forcing else np.zeros(problem.n)
        t1 = time.perf_counter()
        u = backward_euler_step(problem.M, A, u, f, cfg.dt, cfg.diffusivity, lu=lu)
        res = np.linalg.norm((problem.M + cfg.diffusivity * cfg.dt * A) @ u
                             - (problem.M @ sols[-1] + cfg.dt * f))
        if res > 1e-10 * max(np.linalg.norm(problem.M @ sols[-1] + cfg.dt * f), 1e-300):
            raise RuntimeError("time step residual %.2e at t=%g" % (res, t))
        t_solve += time.perf_counter() - t1
        t_build += t1 - t0
        times.append(t)
        sols.append(u)
    return HeatRun(strategy=strategy, times=np.array(times), solutions=sols, outlines=outlines,
                   n_nonlocal=n_nonlocal, timings={"splice_build": t_build, "solve": t_solve})


def energy_trace(problem, run):
    return np.array([u @ (problem.M @ u) for u in run.solutions])


def error_trace(problem, run, ref_problem, ref_run, norms=("L2", "L1")):
    """Errors against a reference run on a nested refinement, per recorded time."""
    if not np.allclose(run.times, ref_run.times):
        raise ValueError("time grids differ")
    out = {n: [] for n in norms}
    for u, ur in zip(run.solutions, ref_run.solutions):
        fu = FEFunction(problem.mesh, problem.full_vector(u))
        fr = FEFunction(ref_problem.mesh, ref_problem.full_vector(ur))
        for n in norms:
            out[n].append(error_norm(fu, fr, n, elements=ref_problem.elems_omega))
    return {n: np.array(v) for n, v in out.items()}


def run_heat_experiment(cfg, h=1 / 12, delta=0.2, ref_levels=1, strategies=STRATEGIES,
                        quad_config=None, reference=None):
    """Run every strategy on the coarse mesh and compare with a fine fully nonlocal run.

    ``reference`` may pass a precomputed ``(ref_problem, ref_run)``.
    Returns ``(problem, runs, reference)`` where each run carries its error trace.
    """
    mesh = padded_square_mesh(h, delta)
    problem = build_heat_problem(mesh, delta, quad_config=quad_config)
    if reference is None:
        fine = mesh
        for _ in range(ref_levels):
            fine = refine_uniform(fine)
        ref_problem = build_heat_problem(fine, delta, quad_config=quad_config)
        ref_run = run_heat(ref_problem, cfg, "fully_nonlocal")
        reference = (ref_problem, ref_run)
    ref_problem, ref_run = reference
    runs = {}
    for s in strategies:
        r = run_heat(problem, cfg, s, record_outlines=True)
        r.errors = error_trace(problem, r, ref_problem, ref_run)
        runs[s] = r
    return problem, runs, reference
