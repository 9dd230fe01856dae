import json
import math

import numpy as np
import pytest
from scipy import sparse

from sensorsched import (
    Belief,
    ConstantPolicy,
    CostFunction,
    GridPolicy,
    GridTooLarge,
    MultichainUnresolved,
    PomdpModel,
    ThresholdPolicy,
    apply_kernel,
    build_action_kernel,
    build_all_kernels,
    build_grid,
    evaluate_grid_policy,
    greedy_myopic_policy,
    policy_improvement,
    policy_iteration,
    project,
    push_measure,
    solve_poisson,
)
from sensorsched.solver import (
    ActionKernel,
    cost_table,
    grid_for_points,
    policy_kernel_matrix,
    read_policy_csv,
    write_policy_csv,
    write_solution_json,
)

from conftest import BINARY_ENTROPY_01, random_model

CF2 = CostFunction("entropy", 2.0)


# ---------------------------------------------------------------- grid

def test_grid_m2_r10():
    grid = build_grid(2, 10)
    assert grid.num_points == 11
    np.testing.assert_allclose(grid.points[:, 0], np.arange(11) / 10)


def test_grid_m3_r10_count():
    assert build_grid(3, 10).num_points == math.comb(12, 2)  # 66


def test_grid_r1_vertices_only():
    grid = build_grid(2, 1)
    np.testing.assert_allclose(grid.points, [[0, 1], [1, 0]])


def test_grid_contains_vertices_and_uniform():
    grid = build_grid(3, 6)
    for k in range(3):
        v = np.zeros(3)
        v[k] = 1.0
        assert np.any(np.all(grid.points == v, axis=1))
    i = grid.uniform_ordinal
    np.testing.assert_allclose(grid.points[i], np.full(3, 1 / 3))


def test_grid_ordering_stable():
    a = build_grid(3, 5)
    b = build_grid(3, 5)
    np.testing.assert_array_equal(a.compositions, b.compositions)
    comps = [tuple(c) for c in a.compositions]
    assert comps == sorted(comps)


def test_grid_guard():
    with pytest.raises(GridTooLarge):
        build_grid(6, 100)


def test_project_examples():
    grid = build_grid(2, 10)
    for i in range(grid.num_points):
        assert project(grid.belief(i), grid) == i
    j = project(Belief(np.array([0.26, 0.74])), grid)
    np.testing.assert_allclose(grid.points[j], [0.3, 0.7])
    # exact tie resolves to the lexicographically-first composition
    j = project(Belief(np.array([0.25, 0.75])), grid)
    np.testing.assert_allclose(grid.points[j], [0.2, 0.8])


# ------------------------------------------------------------- kernels

def test_kernel_uninformative_single_entry(uninformative_model):
    grid = build_grid(2, 10)
    k = build_action_kernel(uninformative_model, grid, 0)
    dense = k.matrix.toarray()
    for i in range(grid.num_points):
        row = dense[i]
        assert np.count_nonzero(row) == 1
        j = grid.project_point(grid.points[i]
                               @ uninformative_model.transition)
        assert row[j] == pytest.approx(1.0, abs=1e-12)


def test_kernel_perfect_sensor_uniform_row(perfect_model):
    grid = build_grid(2, 10)
    k = build_action_kernel(perfect_model, grid, 0)
    i = grid.uniform_ordinal
    row = k.matrix.toarray()[i]
    j_hi = grid.project_point(np.array([0.9, 0.1]))
    j_lo = grid.project_point(np.array([0.1, 0.9]))
    assert row[j_hi] == pytest.approx(0.5, abs=1e-12)
    assert row[j_lo] == pytest.approx(0.5, abs=1e-12)


def test_kernel_rows_stochastic_random_models():
    rng = np.random.default_rng(31)
    for _ in range(10):
        m = random_model(rng)
        grid = build_grid(m.num_states, 6)
        for a in range(m.num_sensors):
            k = build_action_kernel(m, grid, a)
            sums = np.asarray(k.matrix.sum(axis=1)).ravel()
            np.testing.assert_allclose(sums, 1.0, atol=1e-10)
            assert k.matrix.min() >= 0


def test_apply_and_push():
    P = np.array([[0.5, 0.5, 0.0], [0.1, 0.6, 0.3], [0.0, 0.2, 0.8]])
    k = ActionKernel(action=0, matrix=sparse.csr_matrix(P))
    ones = np.ones(3)
    np.testing.assert_allclose(apply_kernel(k, ones), ones, atol=1e-15)
    f = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(apply_kernel(k, f), P @ f, atol=1e-15)
    eye = ActionKernel(action=0, matrix=sparse.identity(3, format="csr"))
    np.testing.assert_allclose(apply_kernel(eye, f), f)
    mu = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(push_measure(mu, k), mu @ P, atol=1e-15)
    assert push_measure(mu, k).sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(push_measure(mu, eye), mu)


# ------------------------------------------------------------- poisson

def test_poisson_constant_cost():
    P = sparse.csr_matrix(np.array([[0.3, 0.7], [0.6, 0.4]]))
    sol = solve_poisson(P, np.array([2.5, 2.5]), ref=0)
    assert sol.g == pytest.approx(2.5, abs=1e-10)
    np.testing.assert_allclose(sol.f, [0.0, 0.0], atol=1e-10)


def test_poisson_two_cell_swap():
    # hand solve: g = 0.5, and with f(0) = 0 the system forces f(1) = 0.5
    P = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    c = np.array([0.0, 1.0])
    sol = solve_poisson(P, c, ref=0)
    assert sol.g == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(sol.f, [0.0, 0.5], atol=1e-12)
    defect = sol.g + sol.f - c - P @ sol.f
    assert np.abs(defect).max() < 1e-12


def test_poisson_absorbing_zero_cost():
    P = sparse.csr_matrix(np.array([[1.0, 0.0], [0.5, 0.5]]))
    sol = solve_poisson(P, np.array([0.0, 1.0]), ref=0)
    assert sol.g == pytest.approx(0.0, abs=1e-10)


def test_poisson_identity_constant_cost():
    P = sparse.identity(3, format="csr")
    sol = solve_poisson(P, np.full(3, 0.7), ref=1)
    assert sol.g == pytest.approx(0.7, abs=1e-10)


def test_rvi_agrees_with_direct_solve():
    from sensorsched.solver import _rvi

    rng = np.random.default_rng(2)
    P = sparse.csr_matrix(rng.dirichlet(np.ones(5), size=5))
    c = rng.uniform(0, 1, size=5)
    direct = solve_poisson(P, c, ref=0)
    iterative = _rvi(P, c, ref=0)
    assert iterative.fallback_used
    assert iterative.g == pytest.approx(direct.g, abs=1e-9)
    np.testing.assert_allclose(iterative.f, direct.f, atol=1e-8)
    assert iterative.residual < 1e-8


def test_poisson_multichain_restricts_to_reachable():
    # two invariant cells with different costs: no global solution, but
    # the anchor's own closed cell still has a well-defined average cost
    P = sparse.identity(2, format="csr")
    sol = solve_poisson(P, np.array([0.0, 1.0]), ref=0)
    assert sol.restricted
    assert sol.g == pytest.approx(0.0, abs=1e-12)
    sol = solve_poisson(P, np.array([0.0, 1.0]), ref=1)
    assert sol.g == pytest.approx(1.0, abs=1e-12)


def test_poisson_multichain_unresolved():
    # the anchor reaches two absorbing cells with different costs, so no
    # constant average cost exists even on the reachable set
    P = sparse.csr_matrix(np.array([
        [0.0, 0.5, 0.5],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]))
    with pytest.raises(MultichainUnresolved) as exc:
        solve_poisson(P, np.array([0.0, 0.0, 1.0]), ref=0,
                      rvi_max_iters=500)
    assert exc.value.partial is not None


def test_poisson_residual_random_instances():
    rng = np.random.default_rng(55)
    for _ in range(15):
        n = int(rng.integers(3, 30))
        P = sparse.csr_matrix(rng.dirichlet(np.ones(n), size=n))
        c = rng.uniform(0, 1, size=n)
        sol = solve_poisson(P, c, ref=int(rng.integers(n)))
        assert sol.residual < 1e-8


# ----------------------------------------------------- policy iteration

def test_improvement_all_ties_pick_sensor_zero(cross_model):
    grid = build_grid(2, 10)
    kernels = build_all_kernels(cross_model, grid)
    c = cost_table(grid, CF2)
    pol = policy_improvement(np.zeros(grid.num_points), grid, cross_model,
                             kernels, c)
    assert np.all(pol.table == 0)


def test_single_sensor_one_iteration(perfect_model):
    grid = build_grid(2, 10)
    rep = policy_iteration(perfect_model, grid, cf=CF2)
    assert rep.num_iterations == 1
    assert np.all(rep.final_policy.table == 0)
    assert rep.g == pytest.approx(BINARY_ENTROPY_01, abs=1e-10)


def test_pia_prefers_perfect_over_uninformative(symmetric_q):
    m = PomdpModel(
        transition=symmetric_q,
        sensors=(np.eye(2), np.array([[0.5, 0.5], [0.5, 0.5]])),
    )
    grid = build_grid(2, 40)
    rep = policy_iteration(m, grid, cf=CF2)
    assert rep.g == pytest.approx(BINARY_ENTROPY_01, abs=1e-10)
    # perfect sensor everywhere it matters; ties also resolve to it
    assert np.all(rep.final_policy.table == 0)
    # the all-uninformative start policy has a multichain evaluation
    # (several absorbing cells); the anchor-restricted solve lets PIA
    # recover and still reach the perfect-sensor policy
    rep2 = policy_iteration(m, grid, cf=CF2,
                            init=GridPolicy.constant(grid, 1))
    assert rep2.g == pytest.approx(BINARY_ENTROPY_01, abs=1e-10)


def test_pia_monotone_g_random_instances():
    rng = np.random.default_rng(91)
    for _ in range(15):
        m = random_model(rng)
        grid = build_grid(m.num_states, 8)
        rep = policy_iteration(m, grid, cf=CF2)
        gs = [it.g for it in rep.iterations]
        assert all(gs[i + 1] <= gs[i] + 1e-12 for i in range(len(gs) - 1))


def test_pia_fixed_point_is_greedy(cross_model):
    grid = build_grid(2, 40)
    kernels = build_all_kernels(cross_model, grid)
    rep = policy_iteration(cross_model, grid, cf=CF2, kernels=kernels)
    c = cost_table(grid, CF2)
    greedy = policy_improvement(rep.final_solution.f, grid, cross_model,
                                kernels, c)
    np.testing.assert_array_equal(greedy.table, rep.final_policy.table)


def test_vertex_entrapment_deterministic_chain():
    m = PomdpModel(transition=np.array([[0.0, 1.0], [1.0, 0.0]]),
                   sensors=(np.eye(2),))
    grid = build_grid(2, 10)
    k = build_action_kernel(m, grid, 0)
    dense = k.matrix.toarray()
    v0 = grid.project_point(np.array([1.0, 0.0]))
    v1 = grid.project_point(np.array([0.0, 1.0]))
    # vertices map to vertices with probability 1
    assert dense[v0, v1] == pytest.approx(1.0)
    assert dense[v1, v0] == pytest.approx(1.0)
    g = evaluate_grid_policy(m, grid, GridPolicy.constant(grid, 0), CF2)
    assert g == pytest.approx(0.0, abs=1e-10)


def test_grid_refinement_cauchy(cross_model):
    gs = {}
    for r in (10, 20, 40):
        grid = build_grid(2, r)
        gs[r] = policy_iteration(cross_model, grid, cf=CF2).g
    assert abs(gs[40] - gs[20]) < abs(gs[20] - gs[10])


def test_greedy_myopic_init(cross_model):
    grid = build_grid(2, 20)
    init = greedy_myopic_policy(cross_model, grid, CF2)
    rep = policy_iteration(cross_model, grid, init=init, cf=CF2)
    rep0 = policy_iteration(cross_model, grid, cf=CF2)
    assert rep.g == pytest.approx(rep0.g, abs=1e-9)


def test_evaluate_matches_simulation(perfect_model):
    from sensorsched import estimate_average_cost

    grid = build_grid(2, 40)
    gp = GridPolicy.constant(grid, 0)
    g = evaluate_grid_policy(perfect_model, grid, gp, CF2)
    est = estimate_average_cost(perfect_model, ConstantPolicy(0),
                                Belief.uniform(2), 20000, cf=CF2, n_chains=2)
    assert abs(g - est.mean) <= max(est.half_width, 0.02)


# -------------------------------------------------------------- export

def test_policy_csv_round_trip(tmp_path, cross_model):
    grid = build_grid(2, 20)
    gp = GridPolicy.from_function(grid, ThresholdPolicy(0.5))
    path = tmp_path / "policy.csv"
    write_policy_csv(grid, gp, path)
    points, loaded = read_policy_csv(path)
    np.testing.assert_allclose(points, grid.points, atol=1e-15)
    np.testing.assert_array_equal(loaded.table, gp.table)
    grid2 = grid_for_points(points)
    assert grid2.resolution == 20


def test_solution_json(tmp_path, perfect_model):
    grid = build_grid(2, 10)
    rep = policy_iteration(perfect_model, grid, cf=CF2)
    path = tmp_path / "sol.json"
    write_solution_json(rep, grid, CF2, path)
    doc = json.loads(path.read_text())
    assert doc["resolution"] == 10
    assert doc["log_base"] == 2
    assert doc["g"] == pytest.approx(BINARY_ENTROPY_01, abs=1e-10)
    assert doc["residual"] < 1e-8
