import numpy as np
import pytest

from src.core.errors import MaxIterationsExceeded, NegativeGap
from src.sfm.functions import CutOracle, ModularOracle, WeightedGraph, iwata_oracle, oracle_catalog
from src.sfm.oracle import BasePoint, brute_force_sfm, check_base_membership, greedy_vertex
from src.sfm.solver import (FrankWolfeSolver, MinNormPointSolver, SolverState, conditional_gradient_step, dual_value,
                            duality_gap, evaluate_gap, frank_wolfe, make_solver, min_norm_point, pav_refine,
                            primal_value, run_solver)

M = np.array([1.0, -2.0, 3.0])


def random_oracle(seed, p_max=8):
    rng = np.random.default_rng(seed)
    families = sorted(oracle_catalog())
    family = families[seed % len(families)]
    return oracle_catalog()[family](int(rng.integers(2, p_max + 1)), seed)


def path_cut(unary):
    return CutOracle(WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]), unary)


# --- primal / dual values ---

def test_primal_value():
    oracle = ModularOracle(M)
    assert primal_value(oracle, np.zeros(3)) == 0.0
    assert primal_value(oracle, -M) == pytest.approx(-0.5 * float(M @ M))


def test_dual_value():
    assert dual_value(np.zeros(2)) == 0.0
    assert dual_value(np.array([3.0, 4.0])) == pytest.approx(-12.5)


@pytest.mark.parametrize("seed", range(10))
def test_weak_duality(seed):
    oracle = random_oracle(seed)
    rng = np.random.default_rng(seed)
    w = rng.normal(size=oracle.p)
    s, _ = greedy_vertex(oracle, rng.permutation(oracle.p))
    assert primal_value(oracle, w) - dual_value(s) >= -1e-9
    assert duality_gap(oracle, w, s) >= 0


def test_gap_at_optimum_is_zero():
    assert duality_gap(ModularOracle(M), -M, M) == pytest.approx(0.0, abs=1e-12)


def test_gap_at_zero_direction():
    oracle = path_cut([-2.0, 0.0, 0.0])
    s, _ = greedy_vertex(oracle, [0, 1, 2])
    # identity order on the path: F({0}) = -1, F({0,1}) = -1, F(V) = -2
    assert s.tolist() == pytest.approx([-1.0, 0.0, -1.0])
    assert duality_gap(oracle, np.zeros(3), s) == pytest.approx(0.5 * float(s @ s))


def test_negative_gap_signals_infeasible_dual_point():
    with pytest.raises(NegativeGap):
        duality_gap(ModularOracle(M), -M, np.zeros(3))


def test_gap_evaluation_carries_prefix_pass():
    evaluation = evaluate_gap(ModularOracle(M), -M, M)
    assert evaluation.order.tolist() == [1, 0, 2]
    assert evaluation.prefix_values.tolist() == pytest.approx([0.0, -2.0, -1.0, 2.0])


# --- isotonic refinement ---

def test_pav_feasible_input_unchanged():
    s = np.array([-3.0, -1.0, 2.0])
    assert pav_refine(s, [0, 1, 2]).tolist() == pytest.approx([3.0, 1.0, -2.0])


def test_pav_pools_violators():
    assert pav_refine(np.array([-1.0, -3.0]), [0, 1]).tolist() == pytest.approx([2.0, 2.0])


@pytest.mark.parametrize("seed", range(5))
def test_pav_is_the_projection(seed):
    rng = np.random.default_rng(seed)
    p = 7
    s = rng.normal(size=p)
    ordering = rng.permutation(p)
    w = pav_refine(s, ordering)
    assert np.all(np.diff(w[ordering]) <= 1e-12)
    dist = np.linalg.norm(w + s)
    for _ in range(1000):
        v = np.empty(p)
        v[ordering] = np.sort(rng.normal(size=p) * 2)[::-1]
        assert dist <= np.linalg.norm(v + s) + 1e-12


# --- min-norm point ---

def test_modular_converges_immediately():
    report = min_norm_point(ModularOracle(M), eps=1e-12)
    assert report.converged
    assert report.iterations <= 1
    assert np.allclose(report.s_star, M)
    assert np.allclose(report.w_star, -M)
    assert report.final_gap <= 1e-12


def test_path_cut_minimizer():
    oracle = path_cut([-2.0, 0.0, 0.0])
    report = min_norm_point(oracle, eps=1e-9, raise_on_max_iter=False)
    positive = set(np.flatnonzero(report.w_star > 0).tolist())
    assert positive == set(brute_force_sfm(oracle).minimal_minimizer.to_list())


@pytest.mark.parametrize("seed", range(200))
def test_sign_sandwich(seed):
    oracle = random_oracle(seed, p_max=10)
    report = min_norm_point(oracle, eps=1e-9, raise_on_max_iter=False)
    exact = brute_force_sfm(oracle)
    tol = np.sqrt(2.0 * report.final_gap)
    w = report.w_star
    assert set(np.flatnonzero(w > tol)) <= set(exact.minimal_minimizer.to_list())
    assert set(exact.maximal_minimizer.to_list()) <= set(np.flatnonzero(w >= -tol))


@pytest.mark.parametrize("seed", range(10))
def test_dual_norm_never_increases(seed):
    report = min_norm_point(random_oracle(seed), eps=1e-10, raise_on_max_iter=False)
    norms = report.dual_norms()
    assert np.all(np.diff(norms) <= 1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_iterates_stay_in_base_polytope(seed):
    oracle = random_oracle(seed, p_max=6)
    seen = []
    min_norm_point(oracle, eps=1e-10, callback=lambda solver: seen.append(solver.state), raise_on_max_iter=False)
    for state in seen:
        assert check_base_membership(oracle, state.s.coords, tol=1e-8)
        assert state.s.validate(oracle)


@pytest.mark.parametrize("seed", range(10))
def test_gap_bounds_distance_to_optimum(seed):
    oracle = random_oracle(seed, p_max=6)
    reference = min_norm_point(oracle, eps=1e-12, raise_on_max_iter=False)
    slack = np.sqrt(2.0 * reference.final_gap) + 1e-9
    history = []
    min_norm_point(oracle, eps=1e-9, callback=lambda solver: history.append((solver.w.copy(), solver.gap)),
                   raise_on_max_iter=False)
    for w, gap in history:
        assert np.linalg.norm(w - reference.w_star) <= np.sqrt(2.0 * gap) + slack


@pytest.mark.parametrize("seed", range(10))
def test_frank_wolfe_agrees_with_min_norm_point(seed):
    oracle = random_oracle(seed, p_max=6)
    wolfe = min_norm_point(oracle, eps=1e-9, raise_on_max_iter=False)
    fw = frank_wolfe(oracle, eps=1e-9, max_iter=10_000, raise_on_max_iter=False)
    slack = np.sqrt(2.0 * wolfe.final_gap) + np.sqrt(2.0 * fw.final_gap)
    assert np.linalg.norm(wolfe.w_star - fw.w_star) <= slack + 1e-9
    assert abs(np.linalg.norm(wolfe.s_star) - np.linalg.norm(fw.s_star)) <= 1e-4


def test_plain_frank_wolfe_makes_progress():
    oracle = iwata_oracle(6)
    report = frank_wolfe(oracle, eps=1e-3, max_iter=5000, away_steps=False, raise_on_max_iter=False)
    start = MinNormPointSolver(oracle).gap
    assert report.final_gap < start


# --- conditional gradient step ---

def test_cg_step_at_optimum_is_a_no_op():
    oracle = ModularOracle(M)
    state = SolverState(BasePoint(M.copy(), [(M.copy(), 1.0)]), -M)
    after = conditional_gradient_step(oracle, state)
    assert np.allclose(after.s.coords, M)
    assert np.allclose(after.w, -M)


def test_cg_step_stays_in_base():
    oracle = iwata_oracle(5)
    s0, _ = greedy_vertex(oracle, np.arange(5))
    state = SolverState(BasePoint(s0, [(s0, 1.0)]), -s0)
    after = conditional_gradient_step(oracle, state)
    assert np.linalg.norm(after.s.coords) <= np.linalg.norm(s0) + 1e-12
    assert check_base_membership(oracle, after.s.coords)


@pytest.mark.parametrize("s,d,gamma_max,expected", [
    ([1.0, 0.0], [-1.0, 0.0], 1.0, 1.0),
    ([1.0, 0.0], [-2.0, 0.0], 1.0, 0.5),
    ([1.0, 0.0], [-0.5, 0.0], 1.0, 1.0),
    ([1.0, 0.0], [1.0, 0.0], 1.0, 0.0),
    ([1.0, 0.0], [0.0, 0.0], 1.0, 0.0),
    ([1.0, 0.0], [-0.5, 0.0], 0.25, 0.25),
])
def test_line_search(s, d, gamma_max, expected):
    assert FrankWolfeSolver.line_search(np.array(s), np.array(d), gamma_max) == pytest.approx(expected)


@pytest.mark.parametrize("seed", range(5))
def test_line_search_minimizes_the_quadratic(seed):
    rng = np.random.default_rng(seed)
    s, v = rng.normal(size=4), rng.normal(size=4)
    gamma = FrankWolfeSolver.line_search(s, v - s)
    grid = np.linspace(0, 1, 2001)
    values = [0.5 * np.sum(((1 - g) * s + g * v) ** 2) for g in grid]
    assert 0.5 * np.sum(((1 - gamma) * s + gamma * v) ** 2) <= min(values) + 1e-12


# --- driver ---

def test_max_iterations_carries_best_iterate():
    with pytest.raises(MaxIterationsExceeded) as info:
        min_norm_point(iwata_oracle(12), eps=1e-12, max_iter=1)
    assert info.value.best is not None
    assert info.value.best.converged is False


def test_max_iterations_without_raising():
    report = frank_wolfe(iwata_oracle(12), eps=1e-12, max_iter=2, raise_on_max_iter=False)
    assert not report.converged
    assert report.iterations <= 2


def test_trace_records_every_step():
    report = min_norm_point(iwata_oracle(8), eps=1e-9, raise_on_max_iter=False)
    assert [row.iteration for row in report.trace] == list(range(1, report.iterations + 1))
    assert all(row.oracle_calls > 0 and row.elapsed_ns >= 0 for row in report.trace)


def test_reset_restarts_on_a_new_oracle():
    solver = MinNormPointSolver(iwata_oracle(6))
    solver.step()
    calls = solver.oracle_calls
    solver.reset(ModularOracle(M))
    assert solver.p == 3
    assert solver.gap == pytest.approx(0.0, abs=1e-12)
    assert solver.oracle_calls > calls


def test_make_solver_and_bad_arguments():
    assert isinstance(make_solver("wolfe", ModularOracle(M)), MinNormPointSolver)
    assert isinstance(make_solver("frank_wolfe", ModularOracle(M)), FrankWolfeSolver)
    with pytest.raises(ValueError):
        make_solver("simplex", ModularOracle(M))
    with pytest.raises(ValueError):
        run_solver(MinNormPointSolver(ModularOracle(M)), eps=0.0)


def test_empty_ground_set():
    report = min_norm_point(ModularOracle(np.zeros(0)), eps=1e-9)
    assert report.converged
    assert report.w_star.size == 0
