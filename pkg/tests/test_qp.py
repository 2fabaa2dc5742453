import itertools

import numpy as np
import pytest

from doseinterval import InfeasibleError, QpProblem, QpSolution, ValidationError, solve_qp


def brute_force_optimum(k, q, lo, hi, tol=1e-9):
    """Active-set enumeration oracle for tiny instances.

    Every coordinate is pinned at its lower bound, pinned at its upper
    bound, or free; free coordinates solve the equality-constrained KKT
    system. The best primal-feasible candidate over all 3^n configurations
    is the global optimum of the convex program.
    """
    n = len(q)
    best = np.inf
    best_beta = None
    for states in itertools.product((0, 1, 2), repeat=n):
        beta = np.zeros(n)
        free = [i for i, s in enumerate(states) if s == 2]
        for i, s in enumerate(states):
            if s == 0:
                beta[i] = lo[i]
            elif s == 1:
                beta[i] = hi[i]
        target = -sum(beta[i] for i in range(n) if states[i] != 2)
        if free:
            f = np.array(free)
            kff = k[np.ix_(f, f)]
            fixed = np.array([i for i in range(n) if states[i] != 2], dtype=int)
            lin = q[f] + (k[np.ix_(f, fixed)] @ beta[fixed] if fixed.size else 0.0)
            m = np.zeros((len(f) + 1, len(f) + 1))
            m[: len(f), : len(f)] = kff
            m[: len(f), -1] = 1.0
            m[-1, : len(f)] = 1.0
            rhs = np.concatenate([-lin, [target]])
            sol, *_ = np.linalg.lstsq(m, rhs, rcond=None)
            beta[f] = sol[: len(f)]
        if abs(beta.sum()) > 1e-8:
            continue
        if np.any(beta < lo - 1e-9) or np.any(beta > hi + 1e-9):
            continue
        value = 0.5 * beta @ k @ beta + q @ beta
        if value < best:
            best, best_beta = value, beta
    return best, best_beta


def random_instance(rng, n):
    m = rng.normal(size=(n, n))
    k = m @ m.T + 0.1 * np.eye(n)
    q = rng.normal(size=n)
    lo = -rng.uniform(0.05, 1.5, n)
    hi = rng.uniform(0.05, 1.5, n)
    # occasionally freeze a coordinate at zero
    if rng.random() < 0.3:
        j = rng.integers(n)
        lo[j] = hi[j] = 0.0
    return QpProblem(k, q, lo, hi)


def test_two_coordinate_hand_case():
    problem = QpProblem(np.eye(2), np.array([1.0, -1.0]),
                        np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    sol = solve_qp(problem)
    np.testing.assert_allclose(sol.beta, [-1.0, 1.0], atol=1e-9)
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)
    assert sol.converged


def test_pinned_problem():
    problem = QpProblem(np.eye(3), np.zeros(3), np.zeros(3), np.zeros(3))
    sol = solve_qp(problem)
    np.testing.assert_array_equal(sol.beta, np.zeros(3))
    assert sol.objective == 0.0 and sol.kkt_residual == 0.0


def test_matches_enumeration_oracle_on_random_instances():
    rng = np.random.default_rng(42)
    for trial in range(200):
        n = int(rng.integers(2, 7))
        problem = random_instance(rng, n)
        sol = solve_qp(problem, tol=1e-8)
        oracle, _ = brute_force_optimum(problem.k, problem.q, problem.lo, problem.hi)
        assert sol.objective <= oracle + 1e-4, f"trial {trial}: {sol.objective} vs {oracle}"
        assert sol.objective >= oracle - 1e-6  # cannot beat the optimum
        assert np.all(sol.beta >= problem.lo) and np.all(sol.beta <= problem.hi)
        span = max(np.max(problem.hi - problem.lo), 1.0)
        assert abs(sol.beta.sum()) <= 1e-9 * n * span


def test_five_by_five_grid_example():
    rng = np.random.default_rng(7)
    problem = random_instance(rng, 5)
    sol = solve_qp(problem, tol=1e-8)
    oracle, beta_star = brute_force_optimum(problem.k, problem.q, problem.lo, problem.hi)
    assert sol.objective == pytest.approx(oracle, abs=1e-4)
    np.testing.assert_allclose(sol.beta, beta_star, atol=1e-3)


def test_objective_nonincreasing_across_sweeps():
    rng = np.random.default_rng(9)
    for n in (20, 60):
        problem = random_instance(rng, n)
        trace: list[float] = []
        solve_qp(problem, tol=1e-10, sweep_objectives=trace)
        diffs = np.diff(np.array(trace))
        assert np.all(diffs <= 1e-9)


def test_kkt_residual_reported_and_small():
    rng = np.random.default_rng(11)
    problem = random_instance(rng, 30)
    sol = solve_qp(problem, tol=1e-8)
    assert sol.converged and sol.kkt_residual <= 1e-8


def test_sum_preserved_by_construction():
    rng = np.random.default_rng(13)
    problem = random_instance(rng, 50)
    sol = solve_qp(problem)
    assert abs(sol.beta.sum()) <= 1e-9 * 50 * max(np.max(problem.hi - problem.lo), 1.0)


def test_infeasible_box_detected():
    with pytest.raises(InfeasibleError):
        solve_qp(QpProblem(np.eye(2), np.zeros(2), np.array([0.5, 0.5]), np.array([1.0, 1.0])))
    with pytest.raises(InfeasibleError):
        solve_qp(QpProblem(np.eye(2), np.zeros(2), np.array([-1.0, -1.0]),
                           np.array([-0.5, -0.5])))


def test_asymmetric_k_rejected():
    k = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValidationError, match="symmetric"):
        solve_qp(QpProblem(k, np.zeros(2), -np.ones(2), np.ones(2)))


def test_nonconvergence_flagged():
    rng = np.random.default_rng(17)
    problem = random_instance(rng, 40)
    with pytest.warns(RuntimeWarning, match="KKT residual"):
        sol = solve_qp(problem, tol=1e-14, max_sweeps=1)
    assert isinstance(sol, QpSolution)
    assert not sol.converged


def test_semidefinite_k_gets_ridge_and_solves():
    # rank-1 kernel: flat directions everywhere
    v = np.array([1.0, 2.0, -1.0, 0.5])
    k = np.outer(v, v)
    problem = QpProblem(k, np.array([0.3, -0.2, 0.1, 0.0]),
                        -np.ones(4), np.ones(4))
    sol = solve_qp(problem)
    oracle, _ = brute_force_optimum(k, problem.q, problem.lo, problem.hi)
    assert sol.objective <= oracle + 1e-4
