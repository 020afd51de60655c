import numpy as np
import pytest
import scipy.sparse as sp
from numpy.testing import assert_allclose

from nlsplice.mesh import padded_square_mesh, refine_uniform, structured_triangle_mesh
from nlsplice.timestepping import (STRATEGIES, TimeConfig, backward_euler_step, ball_center,
                                   ball_load, build_heat_problem, energy_trace, error_trace,
                                   forcing_ball, initial_condition, local_dof_mask, run_heat,
                                   spliced_operator, window_elements, window_outline,
                                   window_region)

H, DELTA = 0.25, 0.25


@pytest.fixture(scope="module")
def problem():
    return build_heat_problem(padded_square_mesh(H, DELTA), DELTA)


def test_time_config_validation():
    assert TimeConfig().n_steps == 100
    with pytest.raises(ValueError):
        TimeConfig(dt=0.0)
    with pytest.raises(ValueError):
        TimeConfig(t_end=0.01)
    with pytest.raises(ValueError):
        TimeConfig(window_strategy="sliding")


def test_forcing_ball_moves_on_circle():
    assert_allclose(ball_center(0.0), [0.5, 0.0])
    assert_allclose(np.linalg.norm(ball_center(2.3)), 0.5)
    assert forcing_ball(np.array([0.5, 0.05]), 0.0) == 1.0
    assert forcing_ball(np.array([0.5, 0.15]), 0.0) == 0.0


def test_ball_load_integrates_ball_area():
    m = structured_triangle_mesh(-1, 1, -1, 1, 0.05)
    b = ball_load(m, np.array([0.31, -0.12]), 0.1, depth=4)
    assert_allclose(b.sum(), np.pi * 0.01, rtol=2e-3)
    big = ball_load(m, np.array([0.0, 0.0]), 5.0)
    assert_allclose(big.sum(), 4.0, rtol=1e-12)


def test_backward_euler_step_algebra():
    M = sp.diags([2.0, 4.0]).tocsr()
    A = sp.csr_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    u = backward_euler_step(M, A, np.array([1.0, 0.0]), np.array([0.0, 0.0]), 0.5, 1.0)
    K = (M + 0.5 * A).toarray()
    assert_allclose(K @ u, [2.0, 0.0], atol=1e-14)
    # mass is conserved when A annihilates constants
    assert_allclose(np.ones(2) @ (M @ u), 2.0, rtol=1e-14)


def test_window_regions(problem):
    cfg = TimeConfig()
    assert window_region("fully_nonlocal", 0.0, cfg, DELTA) is None
    moving = window_region("moving", 0.0, cfg, DELTA)
    assert moving.contains(np.array([[0.6, 0.2]]))[0]
    assert not moving.contains(np.array([[-0.5, 0.0]]))[0]
    layer = window_region("moving_with_boundary_layer", 0.0, cfg, DELTA)
    assert layer.contains(np.array([[-0.9, 0.0]]))[0]
    ann = window_region("fixed_annulus", 3.0, cfg, DELTA)
    assert ann.contains(np.array([[0.5, 0.5]]))[0] and not ann.contains(np.array([[0.0, 0.0]]))[0]
    with pytest.raises(ValueError):
        window_region("sliding", 0.0, cfg, DELTA)
    assert len(window_elements(problem, None)) == len(problem.elems_omega)


def test_spliced_operator_takes_rows(problem):
    elems = window_elements(problem, window_region("moving", 0.0, TimeConfig(), DELTA))
    mask = local_dof_mask(problem, elems)
    assert 0 < mask.sum() < problem.n
    A = spliced_operator(problem, mask).toarray()
    assert_allclose(A[mask], problem.A_local.toarray()[mask])
    assert_allclose(A[~mask], problem.A_nonlocal.toarray()[~mask])


def test_window_outline_of_square_patch():
    m = structured_triangle_mesh(0, 1, 0, 1, 0.5)
    seg = window_outline(m, np.arange(m.num_elements))
    assert len(seg) == 8
    assert_allclose(np.linalg.norm(seg[:, 2:] - seg[:, :2], axis=1), 0.5)
    assert window_outline(m, np.array([], dtype=int)).shape == (0, 4)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_energy_decays_without_forcing(problem, strategy):
    cfg = TimeConfig(t_end=1.0)
    run = run_heat(problem, cfg, strategy, forcing=False, record_outlines=True)
    e = energy_trace(problem, run)
    assert len(e) == cfg.n_steps + 1
    assert np.all(np.diff(e) <= 1e-14 * e[0])
    assert len(run.n_nonlocal) == cfg.n_steps
    if strategy == "fully_nonlocal":
        assert all(n == problem.n for n in run.n_nonlocal)


def test_initial_condition_has_ball_mass(problem):
    u0 = initial_condition(problem)
    assert_allclose(np.ones(problem.n) @ (problem.M @ u0), np.pi * 0.01, rtol=1e-2)


def test_error_trace_against_refined_run(problem):
    cfg = TimeConfig(t_end=0.3)
    ref = build_heat_problem(refine_uniform(problem.mesh), DELTA)
    ref_run = run_heat(ref, cfg, "fully_nonlocal")
    run = run_heat(problem, cfg, "fully_nonlocal")
    err = error_trace(problem, run, ref, ref_run)
    assert set(err) == {"L2", "L1"} and len(err["L2"]) == 4
    assert np.all(err["L2"] > 0) and np.all(err["L1"] > 0)
    short = run_heat(problem, TimeConfig(t_end=0.2), "fully_nonlocal")
    with pytest.raises(ValueError):
        error_trace(problem, short, ref, ref_run)
