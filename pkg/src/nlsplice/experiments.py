"""Drivers for the patch, optimization, horizon, discontinuity and heat studies.

Every driver returns a report dictionary of plain numbers and lists (ready
for JSON) and keeps the heavier objects under private keys starting with
an underscore.
"""
from dataclasses import dataclass, field, replace
import time

import numpy as np
import scipy.sparse.linalg as spla

from .analytic import (DELTA_LIST, cylinder_2d_case, delta_convergence_case, jump_1d_case,
                       patch_cases)
from .assembly_local import (assemble_load, assemble_local_stiffness, eliminate, interpolate)
from .assembly_nonlocal import assemble_nonlocal_stiffness
from .mesh import (Box, EmptyRegion, build_domain_partition, build_p0p1_meshes, classify_dofs,
                   padded_interval_mesh, padded_square_mesh, graded_square_mesh)
from .norms import CompositeFunction, FEFunction, error_norm
from .opt_coupling import OptCoupling
from .splice import (assemble_splice_alternate, build_restrictions, build_subproblems,
                     assemble_splice, global_operator, smallest_singular_value, solve_splice)


def unit_domain(dim):
    return Box([-1.0] * dim, [1.0] * dim)


# --------------------------------------------------------------------------
# single solves
# --------------------------------------------------------------------------

@dataclass(eq=False)
class FullSolve:
    """Fully local or fully nonlocal solution on the parent mesh."""

    values: np.ndarray
    function: object
    matrix: object
    elements: np.ndarray
    residual: float
    timings: dict = field(default_factory=dict)


def solve_fully_nonlocal(mesh, omega, kernel, f, g, space="P1", quad_config=None,
                         singular_points=(), matrix=None):
    """Nonlocal problem on all of ``omega`` with volume data ``g`` on the collar."""
    t0 = time.perf_counter()
    part = build_domain_partition(mesh, omega, EmptyRegion(), kernel.delta)
    A = matrix if matrix is not None else \
        assemble_nonlocal_stiffness(part, kernel, space, quad_config)
    t1 = time.perf_counter()
    elems = part.elems_N
    b = assemble_load(mesh, f, space, elems, singular_points=singular_points)
    if space == "P1":
        interior = np.flatnonzero(omega.contains(mesh.vertices))
        support = mesh.submesh_vertices(part.elems_nonlocal_space)
        given = np.setdiff1d(support, interior)
        coords = mesh.vertices
        n = mesh.num_vertices
    else:
        interior, given = elems, part.elems_gI
        coords = mesh.centroids
        n = mesh.num_elements
    gv = interpolate(coords[given], g)
    blk = eliminate(A, b, interior, np.zeros(0, dtype=np.int64), given, gv)
    u = spla.spsolve(blk.A_II.tocsc(), blk.rhs)
    res = np.linalg.norm(blk.A_II @ u - blk.rhs) / max(np.linalg.norm(blk.rhs), 1e-300)
    vals = np.full(n, np.nan)
    vals[interior] = u
    vals[given] = gv
    fun = FEFunction(mesh, vals, space, elements=np.union1d(elems, part.elems_gI)
                     if space == "P0" else part.elems_nonlocal_space)
    return FullSolve(values=vals, function=fun, matrix=A, elements=elems, residual=res,
                     timings={"assembly_nonlocal": t1 - t0, "solve": time.perf_counter() - t1})


def solve_fully_local(mesh, omega, f, g, singular_points=()):
    elems = np.flatnonzero(omega.contains(mesh.centroids))
    A = assemble_local_stiffness(mesh, elems)
    b = assemble_load(mesh, f, "P1", elems, singular_points=singular_points)
    interior = np.flatnonzero(omega.contains(mesh.vertices))
    given = np.setdiff1d(mesh.submesh_vertices(elems), interior)
    gv = interpolate(mesh.vertices[given], g)
    blk = eliminate(A, b, interior, np.zeros(0, dtype=np.int64), given, gv)
    u = spla.spsolve(blk.A_II.tocsc(), blk.rhs)
    vals = np.full(mesh.num_vertices, np.nan)
    vals[interior] = u
    vals[given] = gv
    res = np.linalg.norm(blk.A_II @ u - blk.rhs) / max(np.linalg.norm(blk.rhs), 1e-300)
    return FullSolve(values=vals, function=FEFunction(mesh, vals, elements=elems), matrix=A,
                     elements=elems, residual=res)


@dataclass(eq=False)
class SpliceRun:
    system: object
    solution: object
    dofs: object
    partition: object
    function: object
    timings: dict = field(default_factory=dict)


def splice_function(system, sol, partition):
    """The coupled solution as one callable: nonlocal values on the nonlocal subdomain."""
    d = system.dofs
    if d.nonlocal_space == "P1":
        v = np.where(np.isnan(sol.u_N), sol.u_L, sol.u_N)
        elems = np.union1d(d.local_elements, d.nonlocal_elements)
        return FEFunction(d.local_mesh, v, elements=elems)
    return CompositeFunction((FEFunction(d.nonlocal_mesh, sol.u_N, "P0", elements=partition.elems_N),
                              FEFunction(d.local_mesh, sol.u_L)))


def run_splice(mesh, omega, kernel, f, g, space="P1", omega_L=None, omega_N=None,
               quad_config=None, singular_points=(), nonlocal_matrix=None, method="direct"):
    """Build and solve the spliced system for one subdomain splitting.

    ``omega_L`` selects the local subdomain for P1-P1 and ``omega_N`` the
    nonlocal one for P0-P1.
    """
    t0 = time.perf_counter()
    if space == "P1":
        partition = build_domain_partition(mesh, omega, omega_L, kernel.delta)
        dofs = classify_dofs(partition)
    else:
        _, partition, dofs = build_p0p1_meshes(omega_N, mesh, kernel.delta, omega)
    t1 = time.perf_counter()
    A_N = nonlocal_matrix if nonlocal_matrix is not None else \
        assemble_nonlocal_stiffness(partition, kernel, space, quad_config)
    t2 = time.perf_counter()
    local, nonloc = build_subproblems(dofs, partition, kernel, f, g, quad_config,
                                      singular_points, nonlocal_matrix=A_N)
    system = assemble_splice(local, nonloc, build_restrictions(dofs), dofs)
    t3 = time.perf_counter()
    sol = solve_splice(system, method)
    t4 = time.perf_counter()
    system.timings = {"partition": t1 - t0, "assembly_nonlocal": t2 - t1,
                      "splice_build": t3 - t2, "solve": t4 - t3}
    return SpliceRun(system=system, solution=sol, dofs=dofs, partition=partition,
                     function=splice_function(system, sol, partition), timings=system.timings)


def splice_identity_error(run, A_nonlocal_full, mesh=None):
    """``max |A_S - A_S(alt)|`` with the alternate built from fully local/nonlocal operators."""
    d = run.dofs
    m = d.local_mesh if mesh is None else mesh
    omega_elems = np.flatnonzero(run.partition.omega.contains(m.centroids))
    A_L = assemble_local_stiffness(m, omega_elems)
    alt = assemble_splice_alternate(global_operator(A_L, d, "local"),
                                    global_operator(A_nonlocal_full, d, "nonlocal"),
                                    run.system.restrictions)
    diff = (run.system.A_S - alt).tocoo()
    return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0


def well_posedness(run, dense_limit=400):
    """Residual and, for small systems, the scaled smallest singular value."""
    out = {"n": int(run.system.n), "residual": float(run.solution.residual)}
    if run.system.n <= dense_limit:
        smin, smax = smallest_singular_value(run.system.A_S)
        out.update(sigma_min=float(smin), norm2=float(smax), sigma_ratio=float(smin / smax))
    return out


def interior_nodal_error(full, mesh, omega, u_exact):
    interior = np.flatnonzero(omega.contains(mesh.vertices))
    return float(np.max(np.abs(full.values[interior]
                               - interpolate(mesh.vertices[interior], u_exact))))


def nodal_error(run, u_exact):
    return float(np.max(np.abs(run.solution.u - interpolate(run.dofs.coords, u_exact))))


def opt_compare(run, metric="lumped", methods=("exact_quadratic", "quasi_newton")):
    """Optimization-based coupling on the same subproblems as ``run``."""
    oc = OptCoupling(run.system.local, run.system.nonlocal_, run.dofs, metric)
    out = {"n_controls": oc.n_controls}
    for m in methods:
        t0 = time.perf_counter()
        r = oc.minimize(m)
        out[m] = {"J": r.J, "iterations": r.iterations, "grad_norm": r.grad_norm,
                  "max_diff": float(np.max(np.abs(r.u - run.solution.u))),
                  "time": time.perf_counter() - t0}
        out["_" + m] = r
    return out


# --------------------------------------------------------------------------
# studies
# --------------------------------------------------------------------------

def patch_1d(h=0.05, delta=0.1, quad_config=None, with_opt=True):
    """Linear/quadratic P1-P1 patch tests and the quadratic P0-P1 test on (-1, 1)."""
    omega = unit_domain(1)
    omega_L = Box([-1.0], [0.0])
    mesh = padded_interval_mesh(h, delta)
    report = {"experiment": "patch_1d", "h": h, "delta": delta, "cases": []}
    for case in patch_cases(1):
        k = case.kernel
        full = solve_fully_nonlocal(mesh, omega, k, case.f, case.g, quad_config=quad_config)
        run = run_splice(mesh, omega, k, case.f, case.g, omega_L=omega_L, quad_config=quad_config)
        row = {"case": case.name, "space": "P1-P1", "kernel": k.describe(),
               "max_nodal_error": nodal_error(run, case.u_exact),
               "fully_nonlocal_max_error": interior_nodal_error(full, mesh, omega, case.u_exact),
               "identity_error": splice_identity_error(run, full.matrix),
               "well_posedness": well_posedness(run), "timings": run.timings,
               "_run": run}
        if with_opt:
            row["opt"] = opt_compare(run)
        report["cases"].append(row)
    case = patch_cases(1, p0=True)[1]
    k = case.kernel
    run = run_splice(mesh, omega, k, case.f, case.g, space="P0", omega_N=Box([0.0], [1.0]),
                     quad_config=quad_config)
    full = solve_fully_nonlocal(mesh, omega, k, case.f, case.g, space="P0",
                                quad_config=quad_config)
    elems = full.elements
    report["cases"].append({
        "case": case.name, "space": "P0-P1", "kernel": k.describe(),
        "splice_L2": error_norm(run.function, case.u_exact, "L2", mesh=mesh, elements=elems,
                                subdivide=2),
        "fully_nonlocal_L2": error_norm(full.function, case.u_exact, "L2", mesh=mesh,
                                        elements=elems, subdivide=2),
        "well_posedness": well_posedness(run), "timings": run.timings, "_run": run})
    return report


PATCH_2D_SPLITS = {
    "left_right": lambda: Box([-1.0, -1.0], [0.0, 1.0]),
    "inclusion": lambda: Box([-1.0, -1.0], [1.0, 1.0]) - Box([-0.25, -0.25], [0.25, 0.25]),
}


def patch_2d(h=1 / 12, delta=0.2, splits=("left_right", "inclusion"), quad_config=None,
             with_opt=True):
    """Quadratic 2D patch test for the left/right and inclusion splittings."""
    case = patch_cases(2)[0]
    k = replace(case.kernel, delta=float(delta))
    omega = unit_domain(2)
    mesh = padded_square_mesh(h, delta)
    full = solve_fully_nonlocal(mesh, omega, k, case.f, case.g, quad_config=quad_config)
    full_err = interior_nodal_error(full, mesh, omega, case.u_exact)
    report = {"experiment": "patch_2d", "h": h, "delta": delta, "kernel": k.describe(),
              "fully_nonlocal_Linf": full_err, "fully_nonlocal_residual": full.residual,
              "timings": full.timings, "splits": []}
    for name in splits:
        run = run_splice(mesh, omega, k, case.f, case.g, omega_L=PATCH_2D_SPLITS[name](),
                         quad_config=quad_config)
        row = {"split": name, "splice_Linf": nodal_error(run, case.u_exact),
               "identity_error": splice_identity_error(run, full.matrix),
               "well_posedness": well_posedness(run), "timings": run.timings, "_run": run}
        if with_opt:
            row["opt"] = opt_compare(run, methods=("exact_quadratic",))
        report["splits"].append(row)
    return report


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def delta_convergence(h=0.0025, deltas=DELTA_LIST, quad_config=None):
    """L2 distance of spliced and fully nonlocal solutions to the local solution."""
    omega = unit_domain(1)
    omega_L = Box([-1.0], [0.0])
    rows = []
    for d in deltas:
        case = delta_convergence_case(d)
        mesh = padded_interval_mesh(h, d)
        full = solve_fully_nonlocal(mesh, omega, case.kernel, case.f, case.g,
                                    quad_config=quad_config, singular_points=case.singular_points)
        run = run_splice(mesh, omega, case.kernel, case.f, case.g, omega_L=omega_L,
                         quad_config=quad_config, singular_points=case.singular_points)
        elems = full.elements
        rows.append({"delta": d,
                     "splice_L2": error_norm(run.function, case.u_exact, "L2", mesh=mesh,
                                             elements=elems, order=9),
                     "fully_nonlocal_L2": error_norm(full.function, case.u_exact, "L2",
                                                     mesh=mesh, elements=elems, order=9),
                     "identity_error": splice_identity_error(run, full.matrix),
                     "residual": run.solution.residual, "n": run.system.n,
                     "timings": run.timings})
    ds = [r["delta"] for r in rows]
    local = solve_fully_local(padded_interval_mesh(h, 0.0), omega, delta_convergence_case(1.0).f,
                              delta_convergence_case(1.0).g, singular_points=(0.0,))
    return {"experiment": "delta_convergence", "h": h, "rows": rows,
            "splice_slope": loglog_slope(ds, [r["splice_L2"] for r in rows]),
            "fully_nonlocal_slope": loglog_slope(ds, [r["fully_nonlocal_L2"] for r in rows]),
            "local_fe_L2": error_norm(local.function, delta_convergence_case(1.0).u_exact, "L2",
                                      mesh=local.function.mesh, elements=local.elements,
                                      order=9),
            "local_fe_residual": local.residual}


def jump_1d(delta=0.1, h=None, quad_config=None, spaces=("P1", "P0")):
    """Jump solution with the nonlocal subdomain around the discontinuity."""
    case = jump_1d_case(delta)
    h = delta / 4 if h is None else h
    omega = unit_domain(1)
    mesh = padded_interval_mesh(h, delta)
    omega_N = Box([-0.25], [0.25])
    omega_L = omega - omega_N
    report = {"experiment": "jump_1d", "h": h, "delta": delta, "rows": []}
    for space in spaces:
        full = solve_fully_nonlocal(mesh, omega, case.kernel, case.f, case.g, space,
                                    quad_config, case.singular_points)
        run = run_splice(mesh, omega, case.kernel, case.f, case.g, space, omega_L=omega_L,
                         omega_N=omega_N, quad_config=quad_config,
                         singular_points=case.singular_points)
        elems = full.elements
        report["rows"].append({
            "space": space + "-P1" if space == "P0" else "P1-P1",
            "splice_L2": error_norm(run.function, case.u_exact, "L2", mesh=mesh, elements=elems,
                                    subdivide=2),
            "fully_nonlocal_L2": error_norm(full.function, case.u_exact, "L2", mesh=mesh,
                                            elements=elems, subdivide=2),
            "identity_error": splice_identity_error(run, full.matrix) if space == "P1" else None,
            "well_posedness": well_posedness(run), "timings": run.timings, "_run": run})
    return report


def cylinder_2d_windows(h=0.05, delta=0.25, r=0.2, halfwidths=(0.2, 0.25, 0.3, 0.35, 0.4, 0.45),
                        quad_config=None, subdivide=2, h_core=0.025, core_half=0.5):
    """L2 error of the spliced disc solution for square nonlocal windows ``(-a, a)^2``.

    The mesh has spacing ``h_core`` inside ``(-core_half, core_half)^2``, where the
    solution jumps, and ``h`` elsewhere. ``h_core=None`` gives a uniform mesh.
    """
    case = cylinder_2d_case((0.0, 0.0), r, delta)
    omega = unit_domain(2)
    if h_core is None:
        mesh = padded_square_mesh(h, delta)
    else:
        mesh = graded_square_mesh(h, delta, h_core, core_half)
    t0 = time.perf_counter()
    full = solve_fully_nonlocal(mesh, omega, case.kernel, case.f, case.g,
                                quad_config=quad_config)
    elems = full.elements
    err = lambda fun: error_norm(fun, case.u_exact, "L2", mesh=mesh, elements=elems,
                                 subdivide=subdivide)
    report = {"experiment": "cylinder_2d_windows", "h": h, "h_core": h_core,
              "core_half": core_half, "delta": delta, "r": r, "n_elements": mesh.num_elements,
              "fully_nonlocal_L2": err(full.function), "rows": [],
              "timings": {"fully_nonlocal": time.perf_counter() - t0}}
    for a in halfwidths:
        win = Box([-a, -a], [a, a])
        run = run_splice(mesh, omega, case.kernel, case.f, case.g,
                         omega_L=omega - win, nonlocal_matrix=full.matrix)
        report["rows"].append({"a": a, "splice_L2": err(run.function),
                               "identity_error": splice_identity_error(run, full.matrix),
                               "well_posedness": well_posedness(run), "timings": run.timings})
    return report
