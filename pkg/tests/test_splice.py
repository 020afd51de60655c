import csv

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nlsplice.analytic import patch_cases
from nlsplice.experiments import run_splice, solve_fully_nonlocal, splice_identity_error
from nlsplice.kernel import make_kernel
from nlsplice.mesh import Box, build_domain_partition, classify_dofs, padded_interval_mesh
from nlsplice.splice import (assemble_splice, build_restrictions, build_splice_system,
                             build_subproblems, patch_test_residual, selection_matrix,
                             solve_splice, write_spy_csv)

OMEGA = Box([-1.0], [1.0])


def _system(case, h=0.05, cut=0.0, local_left=True):
    mesh = padded_interval_mesh(h, case.kernel.delta)
    omega_L = Box([-1.0], [cut]) if local_left else Box([cut], [1.0])
    part = build_domain_partition(mesh, OMEGA, omega_L, case.kernel.delta)
    dofs = classify_dofs(part)
    return build_splice_system(dofs, part, case.kernel, case.f, case.g), mesh


def test_selection_matrix():
    R = selection_matrix([2, 0], 4).toarray()
    assert_allclose(R, [[0, 0, 1, 0], [1, 0, 0, 0]])


@pytest.mark.parametrize("case", patch_cases(1), ids=lambda c: c.name)
def test_patch_residual_and_nodal_exactness(case):
    system, _ = _system(case)
    assert patch_test_residual(system, case.u_exact) < 1e-10
    sol = solve_splice(system)
    assert sol.residual < 1e-12
    assert_allclose(sol.u, case.u_exact(system.dofs.coords[:, 0]), atol=1e-10)


def test_splice_matrix_is_square_and_not_symmetric():
    system, _ = _system(patch_cases(1)[1])
    A = system.A_S
    assert A.shape == (system.dofs.n, system.dofs.n)
    assert abs(A - A.T).max() > 1e-3


def test_unpack_agrees_on_overlap():
    case = patch_cases(1)[1]
    system, _ = _system(case)
    sol = solve_splice(system)
    d = system.dofs
    assert_allclose(sol.u_L[d.I_Gamma], sol.u_N[d.I_Gamma])
    assert_allclose(sol.u_N[d.I_NI], sol.u_L[d.I_NI])
    assert_allclose(sol.u_L[d.I_GammaGiven], case.g(d.local_coords[d.I_GammaGiven, 0]))


def test_gmres_matches_direct():
    system, _ = _system(patch_cases(1)[1], h=0.025)
    a = solve_splice(system, "direct")
    b = solve_splice(system, "gmres")
    assert_allclose(b.u, a.u, atol=1e-9)
    with pytest.raises(ValueError):
        solve_splice(system, "jacobi")


def test_block_size_mismatch_is_rejected():
    case = patch_cases(1)[0]
    mesh = padded_interval_mesh(0.1, 0.1)
    part = build_domain_partition(mesh, OMEGA, Box([-1.0], [0.0]), 0.1)
    dofs = classify_dofs(part)
    local, nonloc = build_subproblems(dofs, part, case.kernel, case.f, case.g)
    other = classify_dofs(build_domain_partition(mesh, OMEGA, Box([-1.0], [0.5]), 0.1))
    with pytest.raises(ValueError):
        assemble_splice(local, nonloc, build_restrictions(other), dofs)


def test_write_spy_csv(tmp_path):
    A = sp.csr_matrix(np.array([[1.0, 0.0], [-2.5, 3.0]]))
    write_spy_csv(tmp_path / "s.csv", A)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows == [["row", "col", "value"], ["0", "0", "1.0"], ["1", "0", "-2.5"],
                    ["1", "1", "3.0"]]


def test_p0p1_splice_is_solvable():
    case = patch_cases(1, p0=True)[1]
    mesh = padded_interval_mesh(0.05, case.kernel.delta)
    run = run_splice(mesh, OMEGA, case.kernel, case.f, case.g, space="P0",
                     omega_N=Box([0.0], [1.0]))
    assert run.solution.residual < 1e-12
    assert np.all(np.isfinite(run.solution.u))


@settings(max_examples=12, deadline=None)
@given(k_cut=st.integers(-6, 6), k_delta=st.integers(1, 3), left=st.booleans(),
       s=st.floats(0.1, 0.9))
def test_splice_identity_and_patch_for_random_splits(k_cut, k_delta, left, s):
    h = 0.1
    delta = k_delta * h
    kernel = make_kernel("fractional", 1, delta, s=s)
    mesh = padded_interval_mesh(h, delta)
    u = lambda x: 1.0 + 0.5 * np.asarray(x, float)
    zero = lambda x: np.zeros_like(np.asarray(x, float))
    full = solve_fully_nonlocal(mesh, OMEGA, kernel, zero, u)
    cut = k_cut * h
    omega_L = Box([-1.0], [cut]) if left else Box([cut], [1.0])
    run = run_splice(mesh, OMEGA, kernel, zero, u, omega_L=omega_L, nonlocal_matrix=full.matrix)
    assert splice_identity_error(run, full.matrix) <= 1e-12
    assert run.solution.residual < 1e-12
    assert_allclose(run.solution.u, u(run.dofs.coords[:, 0]), atol=1e-10)
