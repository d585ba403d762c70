import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from forchheimer_afem.assembly import assemble_brinkman, assemble_convection, assemble_forchheimer
from forchheimer_afem.exceptions import NonconvergenceError, SingularSystemError
from forchheimer_afem.mesh import bisect
from forchheimer_afem.solver import (PICARD_RTOL, ProblemData, equilibrate, picard_solve,
                                     solve_linear)
from forchheimer_afem.spaces import build_space

EX1 = [((0.5, 0.5), (1.0, 1.0))]


def test_identity_returns_rhs():
    b = np.arange(1.0, 8.0)
    assert np.array_equal(solve_linear(sp.identity(7, format="csc"), b), b)


def test_spd_two_by_two():
    x = solve_linear(sp.csc_matrix([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0]))
    assert np.allclose(x, [1.0, 1.0], atol=1e-15)


def test_random_sparse_against_dense():
    rng = np.random.default_rng(7)
    A = sp.random(50, 50, density=0.1, random_state=rng) + 10 * sp.identity(50)
    b = rng.standard_normal(50)
    x = solve_linear(A.tocsc(), b)
    assert np.max(np.abs(x - np.linalg.solve(A.toarray(), b))) <= 1e-10
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_singular_system_reports_pivot():
    K = sp.csc_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]]))
    with pytest.raises(SingularSystemError) as info:
        solve_linear(K, np.ones(3))
    assert info.value.pivot == 1


def test_equilibration_preserves_solution():
    rng = np.random.default_rng(3)
    M = 1e-3 * rng.standard_normal((20, 20))
    A = sp.csc_matrix(np.diag(10.0 ** rng.uniform(-6, 6, 20)) + M + M.T)
    Ks, d = equilibrate(A)
    assert np.allclose(Ks.toarray(), np.diag(d) @ A.toarray() @ np.diag(d), rtol=1e-13, atol=0)
    assert np.all(abs(Ks).max(axis=1).toarray() <= 1.0 + 1e-12)
    Ks, _ = equilibrate(A, sweeps=60)
    assert np.allclose(abs(Ks).max(axis=1).toarray(), 1.0, atol=1e-8)


@pytest.mark.parametrize("pair", ["taylor_hood", "mini"])
def test_zero_data_gives_zero_in_one_step(square_mesh, pair):
    sol, rep = picard_solve(build_space(square_mesh, pair), ProblemData())
    assert rep.iterations == 1 and rep.converged
    assert np.all(sol.u == 0) and np.all(sol.p == 0)


def test_brinkman_is_a_fixed_point_after_one_solve(square_mesh):
    space = build_space(square_mesh, "th")
    # the first increment is O(1), so a second step is taken and must reproduce the first
    _, rep = picard_solve(space, ProblemData(EX1, nonlinear=False), tol=1e-14, max_iter=2)
    assert rep.iterations == 2 and rep.history[1] <= 1e-14


@pytest.fixture(scope="module")
def ex1(square_mesh):
    space = build_space(square_mesh, "th")
    return space, picard_solve(space, ProblemData(EX1))


def test_example1_initial_mesh_converges(ex1):
    space, (sol, rep) = ex1
    assert rep.converged and rep.iterations <= 50
    assert rep.final_increment <= 1e-8
    assert len(sol.u) == space.n_velocity and len(sol.p) == space.n_pressure


def test_discrete_divergence_and_pressure_mean(ex1):
    space, (sol, _) = ex1
    _, _, B, m = assemble_brinkman(space)
    assert np.max(np.abs(B @ sol.u)) <= 1e-8
    assert abs(m @ sol.p) <= 1e-10 * np.linalg.norm(sol.p)


def test_galerkin_residual_of_last_iterate(ex1):
    # the returned pair solves the linear system frozen at itself up to the increment
    space, (sol, rep) = ex1
    A0, A1, B, _ = assemble_brinkman(space)
    from forchheimer_afem.solver import assemble_rhs

    A = A0 + A1 + assemble_convection(space, sol.u) + assemble_forchheimer(space, sol.u)
    r = A @ sol.u + B.T @ sol.p - assemble_rhs(space, ProblemData(EX1))
    free = ~space.dirichlet_flags
    scale = np.abs(A).max() + np.abs(B).max()
    assert np.max(np.abs(r[free])) <= 10 * scale * rep.final_increment + 1e-12


def test_monotone_tail(ex1):
    _, (_, rep) = ex1
    tail = rep.history[-3:]
    for a, b in zip(tail, tail[1:]):
        assert b <= 10 * a


def test_bitwise_determinism(square_mesh, ex1):
    space, (sol, _) = ex1
    sol2, _ = picard_solve(build_space(square_mesh, "th"), ProblemData(EX1))
    assert np.array_equal(sol.u, sol2.u) and np.array_equal(sol.p, sol2.p)


def test_constant_pressure_shift_in_initial_guess(ex1):
    space, (sol, _) = ex1
    start = np.concatenate([np.zeros(space.n_velocity), 3.0 * np.ones(space.n_pressure)])
    shifted, _ = picard_solve(space, ProblemData(EX1), initial=start)
    assert np.allclose(shifted.u, sol.u, atol=1e-9)
    assert np.allclose(shifted.p, sol.p, atol=1e-9)
    with pytest.raises(ValueError):
        picard_solve(space, ProblemData(EX1), initial=np.zeros(3))


@settings(max_examples=10, deadline=None)
@given(t=st.sampled_from([2.0, -1.0, 0.5, 3.7, -0.25]))
def test_brinkman_linear_in_force(square_mesh, t):
    space = build_space(square_mesh, "mini")
    base, _ = picard_solve(space, ProblemData(EX1, nonlinear=False))
    scaled, _ = picard_solve(space, ProblemData([((0.5, 0.5), (t, t))], nonlinear=False))
    ref = np.concatenate([base.u, base.p])
    assert np.max(np.abs(scaled.stacked() - t * base.stacked())) <= 1e-10 * max(1, np.abs(ref).max())


def test_nonconvergence_carries_history(square_mesh):
    space = build_space(square_mesh, "th")
    with pytest.raises(NonconvergenceError) as info:
        picard_solve(space, ProblemData([((0.5, 0.5), (400.0, 400.0))]), max_iter=3)
    assert len(info.value.history) == 3


def test_graded_mesh_converges_to_absolute_tolerance(square_mesh):
    mesh = square_mesh
    for _ in range(12):
        from forchheimer_afem.mesh import locate_point

        mesh = bisect(mesh, sorted(locate_point(mesh, (0.5, 0.5))))
    sol, rep = picard_solve(build_space(mesh, "th"), ProblemData(EX1))
    assert rep.converged and rep.final_increment <= 1e-8


def test_rounding_floor_of_the_stopping_test(square_mesh):
    space = build_space(square_mesh, "th")
    # an absolute tolerance far below eps * |x| is met only through the floor
    sol, rep = picard_solve(space, ProblemData(EX1), tol=1e-30)
    assert rep.converged
    assert rep.final_increment <= 1e-30 + PICARD_RTOL * np.linalg.norm(sol.stacked())
    # with the floor the iteration stops before reaching an exact fixed point
    _, exact = picard_solve(space, ProblemData(EX1), tol=1e-30, rtol=0.0)
    assert rep.iterations < exact.iterations and exact.final_increment <= 1e-30
