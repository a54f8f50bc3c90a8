import numpy as np
import pytest
from hypothesis import given, strategies as st

from lralp.mdp_core import (
    DimensionError,
    Mdp,
    action_values,
    apply_policy_operator,
    bellman_operator,
    greedy_policy,
    linear_bellman_operator,
    policy_value,
    random_mdp,
    solve_exact,
    stability_coefficient,
    stack,
    weighted_max_norm,
    weighted_one_norm,
)

from conftest import two_state_swap
from oracles import brute_force_value_iteration, value_iteration_series

seeds = st.integers(0, 2**32 - 1)


def test_policy_operator_hand_example():
    mdp = two_state_swap(0.5)
    out = apply_policy_operator(mdp, [0, 0], np.array([2.0, 4.0]))
    np.testing.assert_allclose(out, [3.0, 1.0])


def test_policy_operator_zero_value_gives_reward(small_mdp):
    u = np.array([0, 1, 2, 0, 1, 2])
    out = apply_policy_operator(small_mdp, u, np.zeros(6))
    np.testing.assert_allclose(out, small_mdp.reward[u, np.arange(6)])


def test_tiny_discount_returns_reward(rng):
    mdp = random_mdp(5, 3, 1e-300, rng)
    J = rng.normal(size=5)
    np.testing.assert_allclose(bellman_operator(mdp, J), mdp.reward.max(axis=0))
    np.testing.assert_array_equal(greedy_policy(mdp, J), mdp.reward.argmax(axis=0))


def test_bellman_matches_brute_force(rng):
    mdp = random_mdp(5, 3, 0.9, rng)
    J = rng.normal(size=5)
    expect = [max(mdp.reward[a, s] + 0.9 * sum(mdp.transition[a, s, t] * J[t] for t in range(5))
                  for a in range(3)) for s in range(5)]
    np.testing.assert_allclose(bellman_operator(mdp, J), expect, atol=1e-12)


def test_single_action_bellman_is_policy_operator(rng):
    mdp = random_mdp(4, 1, 0.7, rng)
    J = rng.normal(size=4)
    np.testing.assert_allclose(bellman_operator(mdp, J), apply_policy_operator(mdp, [0] * 4, J))


def test_stacked_operators_are_action_major(small_mdp, rng):
    J = rng.normal(size=6)
    H = linear_bellman_operator(small_mdp, J)
    for a in range(3):
        np.testing.assert_allclose(H[a * 6:(a + 1) * 6],
                                   apply_policy_operator(small_mdp, [a] * 6, J))
    np.testing.assert_allclose(stack(small_mdp, J), np.tile(J, 3))
    np.testing.assert_allclose(action_values(small_mdp, J).reshape(-1), H)


def test_ties_go_to_lowest_action(rng):
    P = np.repeat(random_mdp(4, 1, 0.9, rng).transition, 3, axis=0)
    mdp = Mdp(P, np.zeros((3, 4)), 0.9)
    np.testing.assert_array_equal(greedy_policy(mdp, rng.normal(size=4)), 0)


def test_self_loop_value_is_geometric():
    mdp = Mdp(np.ones((1, 1, 1)), np.array([[2.0]]), 0.75)
    assert policy_value(mdp, [0])[0] == pytest.approx(8.0)
    assert solve_exact(mdp).values[0] == pytest.approx(8.0)


def test_zero_reward_value_is_zero(small_mdp):
    mdp = Mdp(small_mdp.transition, np.zeros_like(small_mdp.reward), 0.9)
    np.testing.assert_allclose(policy_value(mdp, [1] * 6), 0.0, atol=1e-14)


@given(seeds)
def test_policy_value_matches_series(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(6, 2, float(rng.uniform(0.3, 0.95)), rng)
    u = rng.integers(0, 2, size=6)
    np.testing.assert_allclose(policy_value(mdp, u), value_iteration_series(mdp, u), atol=1e-8)


def test_solve_exact_matches_pure_python_iteration(rng):
    mdp = random_mdp(5, 3, 0.8, rng)
    np.testing.assert_allclose(solve_exact(mdp).values, brute_force_value_iteration(mdp), atol=1e-8)


@pytest.mark.parametrize("method", ["vi", "lp"])
def test_solve_exact_fixed_point(method, rng):
    mdp = random_mdp(8, 3, 0.95, rng)
    sol = solve_exact(mdp, method=method)
    assert np.max(np.abs(bellman_operator(mdp, sol.values) - sol.values)) <= 1e-8
    np.testing.assert_allclose(policy_value(mdp, sol.policy), sol.values, atol=1e-8)


def test_solve_exact_long_horizon(rng):
    mdp = random_mdp(30, 2, 0.999, rng)
    sol = solve_exact(mdp)
    assert np.max(np.abs(bellman_operator(mdp, sol.values) - sol.values)) <= 1e-7


def test_weighted_norm_examples():
    assert weighted_one_norm([1.0, -2.0, 3.0], np.full(3, 1 / 3)) == pytest.approx(2.0)
    assert weighted_one_norm(np.zeros(3), np.full(3, 1 / 3)) == 0.0
    assert weighted_one_norm([5.0, -7.0], [0.0, 1.0]) == 7.0
    assert weighted_max_norm([2.0, -6.0], [1.0, 3.0]) == pytest.approx(2.0)
    psi = np.array([1.0, 2.0, 0.5])
    assert weighted_max_norm(-3.0 * psi, psi) == pytest.approx(3.0)
    assert weighted_max_norm([1.0, -4.0, 2.0], np.ones(3)) == 4.0


@given(seeds)
def test_one_norm_dominated_by_weighted_max(seed):
    rng = np.random.default_rng(seed)
    J, psi = rng.normal(size=7), rng.uniform(0.1, 3, size=7)
    c = rng.dirichlet(np.ones(7))
    assert weighted_one_norm(J, c) <= (c @ psi) * weighted_max_norm(J, psi) + 1e-12


def test_stability_coefficient_examples(rng):
    mdp = random_mdp(5, 2, 0.9, rng)
    assert stability_coefficient(mdp, np.ones(5)) == pytest.approx(0.9)
    absorbing = Mdp(np.ones((2, 1, 1)), np.zeros((2, 1)), 0.6)
    assert stability_coefficient(absorbing, [3.7]) == pytest.approx(0.6)
    psi = rng.uniform(0.5, 2, size=5)
    brute = max(0.9 * sum(mdp.transition[a, s, t] * psi[t] for t in range(5)) / psi[s]
                for a in range(2) for s in range(5))
    assert stability_coefficient(mdp, psi) == pytest.approx(brute)


@given(seeds)
def test_monotone_and_contractive(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(6, 3, 0.8, rng)
    J1 = rng.normal(size=6)
    J2 = J1 + rng.uniform(0, 2, size=6)
    assert np.all(bellman_operator(mdp, J1) <= bellman_operator(mdp, J2) + 1e-12)
    assert np.all(linear_bellman_operator(mdp, J1) <= linear_bellman_operator(mdp, J2) + 1e-12)
    psi = rng.uniform(1, 1.2, size=6)
    beta = stability_coefficient(mdp, psi)
    if beta < 1:
        J3 = rng.normal(size=6) * 5
        lhs = weighted_max_norm(bellman_operator(mdp, J1) - bellman_operator(mdp, J3), psi)
        assert lhs <= beta * weighted_max_norm(J1 - J3, psi) + 1e-10


@given(seeds)
def test_superharmonic_dominates_optimum(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(6, 2, 0.85, rng)
    Jstar = solve_exact(mdp).values
    J = Jstar + rng.uniform(0, 1) / (1 - 0.85) + rng.uniform(0, 0.01, size=6)
    if np.all(J >= bellman_operator(mdp, J)):
        assert np.all(J >= Jstar - 1e-9)


def test_validation_errors():
    with pytest.raises(DimensionError):
        Mdp(np.ones((1, 2, 3)) / 3, np.zeros((1, 2)), 0.5)
    with pytest.raises(ValueError):
        Mdp(np.array([[[0.5, 0.4], [0.5, 0.5]]]), np.zeros((1, 2)), 0.5)
    with pytest.raises(ValueError):
        Mdp(np.array([[[1.0]]]), np.zeros((1, 1)), 1.0)
    with pytest.raises(ValueError):
        Mdp(np.array([[[1.0]]]), np.array([[2.0]]), 0.5, strict=True)
    mdp = Mdp(np.array([[[1.0]]]), np.array([[-2.0]]), 0.5)
    with pytest.raises(DimensionError):
        policy_value(mdp, [0, 0])
    with pytest.raises(ValueError):
        policy_value(mdp, [1])


def test_json_round_trip_is_exact(tmp_path, rng):
    mdp = random_mdp(7, 3, 0.93, rng)
    path = tmp_path / "m.json"
    mdp.save(path)
    back = Mdp.load(path)
    np.testing.assert_array_equal(back.transition, mdp.transition)
    np.testing.assert_array_equal(back.reward, mdp.reward)
    assert back.discount == mdp.discount
