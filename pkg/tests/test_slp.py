import numpy as np
import pytest
from numpy.testing import assert_allclose

from regretsynth.errors import CausalityError, DimensionMismatchError
from regretsynth.operators import build_stacked, rollout_open_loop, split_delta
from regretsynth.slp import (
    Controller,
    SystemResponse,
    achievability_residual,
    causal_pattern,
    closed_loop_response,
    recover_controller,
)

from conftest import random_system


def random_controller(rng, sys, scale=0.5):
    return Controller([
        scale * rng.standard_normal((sys.m, sys.n * (k + 1)))
        for k in range(sys.horizon + 1)
    ])


def test_zero_controller_gives_open_loop_response(rng):
    sys = random_system(rng, n=2, m=1, p=3, T=3)
    ops = build_stacked(sys)
    phi = closed_loop_response(sys, Controller.zeros(sys))
    assert_allclose(phi.Phi_x, ops.G, atol=1e-12)
    assert not np.any(phi.Phi_u)


@pytest.mark.parametrize('dims', [(2, 1, 2, 3), (3, 2, 4, 2), (1, 1, 1, 5)])
def test_closed_loop_response_is_achievable(rng, dims):
    sys = random_system(rng, *dims)
    ops = build_stacked(sys)
    for _ in range(10):
        phi = closed_loop_response(sys, random_controller(rng, sys))
        assert achievability_residual(phi, ops) <= 1e-9 * max(1.0, np.linalg.norm(phi.Phi))


def test_closed_loop_response_matches_simulation(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=4)
    K = random_controller(rng, sys)
    phi = closed_loop_response(sys, K)
    delta = rng.standard_normal(sys.delta_dim)
    x0, w = split_delta(sys, delta)

    x = np.zeros((sys.horizon + 1, sys.n))
    u = np.zeros((sys.horizon + 1, sys.m))
    x[0] = x0
    for k in range(sys.horizon + 1):
        u[k] = sum(K.block(k, j) @ x[j] for j in range(k + 1))
        if k < sys.horizon:
            x[k + 1] = sys.A_seq[k] @ x[k] + sys.B_seq[k] @ u[k] + sys.E_seq[k] @ w[k]

    x_phi, u_phi = phi.apply(delta)
    assert_allclose(x_phi, x, atol=1e-10)
    assert_allclose(u_phi, u, atol=1e-10)
    assert_allclose(rollout_open_loop(sys, x0, u, w), x, atol=1e-10)


@pytest.mark.parametrize('dims', [(2, 1, 2, 3), (2, 2, 3, 3), (3, 1, 3, 2)])
def test_controller_round_trip(rng, dims):
    sys = random_system(rng, *dims)
    K = random_controller(rng, sys)
    recovered = recover_controller(closed_loop_response(sys, K))
    err = np.linalg.norm(recovered.K - K.K)
    assert err <= 1e-8 * max(1.0, np.linalg.norm(K.K))


def test_recovered_gain_is_causal(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=3)
    K = recover_controller(closed_loop_response(sys, random_controller(rng, sys)))
    for k in range(sys.horizon + 1):
        assert not np.any(K.K[k*K.m:(k+1)*K.m, K.n*(k+1):])


def test_causal_pattern_shape():
    mask = causal_pattern(n=2, m=1, p=3, horizon=2)
    assert mask.shape == (9, 8)
    assert mask[:2, :2].all() and not mask[:2, 2:].any()
    assert mask[4:6, :8].all()
    assert mask[6, :2].all() and not mask[6, 2:].any()


def test_from_dense_rejects_noncausal_entry(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=2)
    phi = closed_loop_response(sys, random_controller(rng, sys))
    Phi_x = phi.Phi_x.copy()
    Phi_x[0, -1] = 1e-3
    with pytest.raises(CausalityError):
        SystemResponse.from_dense(Phi_x, phi.Phi_u, n=2, p=2)
    tolerant = SystemResponse.from_dense(Phi_x, phi.Phi_u, n=2, p=2, tol=1e-2)
    assert_allclose(tolerant.Phi_x, phi.Phi_x)


def test_from_dense_round_trip(rng):
    sys = random_system(rng, n=2, m=1, p=3, T=3)
    phi = closed_loop_response(sys, random_controller(rng, sys))
    again = SystemResponse.from_dense(phi.Phi_x, phi.Phi_u, n=2, p=3)
    assert_allclose(again.Phi, phi.Phi)
    assert again.horizon == 3 and again.m == 1


def test_noncausal_response_has_no_controller(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=2)
    phi = closed_loop_response(sys, random_controller(rng, sys))
    full = SystemResponse.from_dense(phi.Phi_x, phi.Phi_u, n=2, p=2, causal=False)
    with pytest.raises(CausalityError):
        recover_controller(full)


def test_controller_from_dense_rejects_future_gain():
    K = np.zeros((2, 4))
    K[0, 3] = 1.0
    with pytest.raises(CausalityError):
        Controller.from_dense(K, n=2, m=1)


def test_controller_shape_checked(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=2)
    K = Controller([np.zeros((1, 2)), np.zeros((1, 4)), np.zeros((1, 6))])
    short = Controller([np.zeros((1, 2)), np.zeros((1, 4))])
    closed_loop_response(sys, K)
    with pytest.raises(DimensionMismatchError):
        closed_loop_response(sys, short)
    with pytest.raises(DimensionMismatchError):
        Controller([np.zeros((1, 2)), np.zeros((1, 3))])


def test_perturbed_controller_breaks_response_match(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=3)
    K = random_controller(rng, sys)
    phi = closed_loop_response(sys, K)
    other = closed_loop_response(sys, K.perturbed(1.1))
    assert np.linalg.norm(other.Phi - phi.Phi) > 1e-3
