import numpy as np
import pytest
from numpy.testing import assert_allclose

from regretsynth.errors import (
    DimensionMismatchError,
    NotPositiveSemidefiniteError,
    RankDeficientError,
)
from regretsynth.operators import (
    CostSpec,
    LTVSystem,
    build_stacked,
    evaluate_cost,
    noncausal_control,
    noncausal_cost_operator,
    rollout_open_loop,
    split_delta,
    stack_delta,
)

from conftest import random_cost, random_system


def test_scalar_stacked_operators(scalar_system):
    sys, _ = scalar_system
    ops = build_stacked(sys)
    assert_allclose(ops.F, [[0, 0], [1, 0]])
    assert_allclose(ops.G, [[1, 0], [1, 1]])


def test_zero_input_matrix_gives_zero_F(rng):
    sys = random_system(rng, n=2, m=2, p=3, T=3)
    sys = LTVSystem(sys.A_seq, [np.zeros((2, 2))] * 4, sys.E_seq)
    assert not np.any(build_stacked(sys).F)


def test_first_block_row_passes_x0(rng):
    sys = random_system(rng, n=3, m=1, p=3, T=2)
    G = build_stacked(sys).G
    assert_allclose(G[:3], np.hstack((np.eye(3), np.zeros((3, 6)))))


@pytest.mark.parametrize('dims', [(2, 1, 2, 2), (3, 2, 4, 4), (1, 1, 1, 6)])
def test_stacked_states_match_rollout(rng, dims):
    n, m, p, T = dims
    sys = random_system(rng, n, m, p, T)
    ops = build_stacked(sys)
    for _ in range(100):
        u = rng.standard_normal((T + 1, m))
        x0 = rng.standard_normal(n)
        w = rng.standard_normal((T, p))
        x = rollout_open_loop(sys, x0, u, w)
        stacked = ops.F @ u.ravel() + ops.G @ stack_delta(x0, w)
        assert np.max(np.abs(stacked - x.ravel())) < 1e-10


def test_F_is_strictly_block_lower_triangular(rng):
    n, m, T = 2, 2, 4
    sys = random_system(rng, n, m, 2, T)
    F = build_stacked(sys).F
    for k in range(T + 1):
        assert not np.any(F[k*n:(k+1)*n, k*m:])


def test_scalar_benchmark_operator(scalar_system):
    sys, cost = scalar_system
    O = noncausal_cost_operator(sys, cost)
    assert_allclose(O.O, [[1.5, 0.5], [0.5, 0.5]], atol=1e-12)
    assert_allclose(O.O1, [[1.5]])
    assert_allclose(O.O2, [[0.5]])
    assert_allclose(O.O3, [[0.5]])


def test_zero_state_cost_gives_zero_benchmark(rng):
    sys = random_system(rng, T=3)
    cost = CostSpec.time_invariant(np.zeros((2, 2)), np.eye(1), 3)
    assert_allclose(noncausal_cost_operator(sys, cost).O, 0.0, atol=1e-14)


def test_scalar_noncausal_control(scalar_system):
    sys, cost = scalar_system
    x0, w0 = 0.7, -1.3
    u = noncausal_control(sys, cost, [x0, w0])
    assert_allclose(u.ravel(), [-(x0 + w0) / 2, 0.0], atol=1e-12)
    assert_allclose(noncausal_control(sys, cost, [0.0, 0.0]), 0.0)


def test_benchmark_cost_matches_noncausal_trajectory(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=3)
    cost = random_cost(rng, T=3)
    O = noncausal_cost_operator(sys, cost)
    for _ in range(50):
        delta = rng.standard_normal(sys.delta_dim)
        x0, w = split_delta(sys, delta)
        u = noncausal_control(sys, cost, delta)
        J = evaluate_cost(sys, cost, x0, u, w)
        assert O.cost(delta) == pytest.approx(J, rel=1e-8)


def test_benchmark_is_optimal_against_random_inputs(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=2)
    cost = random_cost(rng, T=2)
    O = noncausal_cost_operator(sys, cost)
    delta = rng.standard_normal(sys.delta_dim)
    x0, w = split_delta(sys, delta)
    best = O.cost(delta)
    u_star = noncausal_control(sys, cost, delta)
    for _ in range(1000):
        u = u_star + rng.standard_normal(u_star.shape)
        assert best <= evaluate_cost(sys, cost, x0, u, w) + 1e-9


def test_benchmark_is_psd(rng):
    sys = random_system(rng, n=3, m=2, p=3, T=4)
    cost = random_cost(rng, n=3, m=2, T=4)
    O = noncausal_cost_operator(sys, cost).O
    assert_allclose(O, O.T)
    assert np.linalg.eigvalsh(O)[0] >= -1e-8


def test_scalar_cost_by_hand(scalar_system):
    sys, cost = scalar_system
    assert evaluate_cost(sys, cost, [1.0], np.zeros((2, 1)), [[0.0]]) == 2.0
    assert evaluate_cost(sys, cost, [0.0], np.zeros((2, 1)), [[0.0]]) == 0.0


def test_stacked_cost_matches_per_step_sum(rng):
    sys = random_system(rng, T=4)
    cost = random_cost(rng, T=4)
    x0 = rng.standard_normal(2)
    u = rng.standard_normal((5, 1))
    w = rng.standard_normal((4, 2))
    x = rollout_open_loop(sys, x0, u, w)
    per_step = sum(
        x[k] @ cost.Q_seq[k] @ x[k] + u[k] @ cost.R_seq[k] @ u[k]
        for k in range(5)
    )
    assert evaluate_cost(sys, cost, x0, u, w) == pytest.approx(per_step, rel=1e-10)


def test_cost_square_root(rng):
    cost = random_cost(rng, n=3, m=2, T=3)
    C = cost.C
    assert np.linalg.norm(cost.C_sqrt @ cost.C_sqrt - C) <= 1e-10 * np.linalg.norm(C)


def test_indefinite_state_cost_names_index():
    Q_seq = [np.eye(2), np.eye(2), np.diag([1.0, -1.0])]
    with pytest.raises(NotPositiveSemidefiniteError) as info:
        CostSpec(Q_seq, [np.eye(1)] * 3)
    assert info.value.index == 2
    assert 'Q_2' in str(info.value)


def test_singular_input_cost_rejected():
    with pytest.raises(NotPositiveSemidefiniteError):
        CostSpec([np.eye(2)] * 2, [np.zeros((1, 1))] * 2)


def test_rank_deficient_disturbance_matrix():
    E = np.array([[1.0], [0.0]])
    with pytest.raises(RankDeficientError) as info:
        LTVSystem.time_invariant(np.eye(2), np.ones((2, 1)), E, 2)
    assert info.value.index == 0


def test_inconsistent_lengths():
    with pytest.raises(DimensionMismatchError):
        LTVSystem([np.eye(2)] * 3, [np.ones((2, 1))] * 2, [np.eye(2)] * 2)


def test_delta_length_checked(scalar_system):
    sys, cost = scalar_system
    with pytest.raises(DimensionMismatchError):
        noncausal_control(sys, cost, [1.0, 2.0, 3.0])
