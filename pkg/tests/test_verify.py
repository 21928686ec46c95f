import numpy as np
import pytest

from regretsynth.errors import (
    CombinatorialBudgetError,
    ConditioningError,
    DimensionMismatchError,
)
from regretsynth.operators import noncausal_cost_operator
from regretsynth.slp import Controller, closed_loop_response
from regretsynth.synthesis import (
    EnergyBall,
    PointwiseEllipsoid,
    RegretWeight,
    synth_energy_ball,
    synth_zero_init,
    synthesize,
)
from regretsynth.verify import (
    ChainReport,
    energy_ball_violation,
    local_level_lower_bound,
    polytopic_exact_level,
    regret_matrix,
    regret_psd_margin,
    sample_certificate,
    single_ellipsoid_level,
    suboptimality_floor,
    worst_case_disturbance_zero_init,
)

from conftest import pointwise_instance, random_cost, random_system


def test_floor_for_identity_weight():
    assert suboptimality_floor(np.eye(5)) == pytest.approx(2 / np.pi)


def test_floor_scales_with_condition():
    W = RegretWeight(np.diag([1.0, 4.0, 2.0]), n=1)
    assert suboptimality_floor(W) == pytest.approx(2 / (4 * np.pi))


def test_floor_rejects_ill_conditioned_weight():
    with pytest.raises(ConditioningError):
        suboptimality_floor(np.diag([1.0, 1e-13]))


def test_any_causal_controller_has_nonnegative_regret(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=3)
    cost = random_cost(rng, T=3)
    O = noncausal_cost_operator(sys, cost)
    for _ in range(20):
        K = Controller([
            rng.standard_normal((1, 2 * (k + 1))) for k in range(4)
        ])
        phi = closed_loop_response(sys, K)
        assert regret_psd_margin(phi, cost, O) >= -1e-8 * np.linalg.norm(O.O)


def test_worst_case_disturbance_attains_level(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    result = synth_zero_init(sys, cost, O, W)
    worst = worst_case_disturbance_zero_init(result.phi, cost, O.O3, W.W3)
    assert worst.w.shape == (sys.horizon, sys.p)
    delta = np.concatenate((np.zeros(sys.n), worst.w.ravel()))
    R = regret_matrix(result.phi, cost, O)
    ratio = delta @ R @ delta / (delta @ W.W @ delta)
    assert ratio == pytest.approx(worst.level, rel=1e-8)
    assert worst.level == pytest.approx(result.mu, rel=1e-5, abs=1e-7)


def test_energy_ball_violation_certifies_level(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    x0 = np.array([1.0, 0.0])
    result = synth_energy_ball(sys, cost, O, W, x0, omega=1.0)
    assert result.mu > 1e-3
    assert energy_ball_violation(result.phi, cost, O, W, x0, 1.0, result.mu) <= 1e-6
    assert energy_ball_violation(result.phi, cost, O, W, x0, 1.0, 0.5 * result.mu) > 0.0


def test_energy_ball_violation_dominates_samples(di_system, rng):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    phi = closed_loop_response(sys, Controller.zeros(sys))
    W = np.eye(sys.delta_dim)
    x0 = np.array([0.3, -0.2])
    exact = energy_ball_violation(phi, cost, O, W, x0, 0.5, 0.1)
    sampled = sample_certificate(
        phi, cost, O, W, EnergyBall(0.5, x0), 0.1, n_samples=2000
    )
    assert sampled <= exact + 1e-9


def test_single_ellipsoid_matches_pointwise_level():
    instance = pointwise_instance(T=1)
    result = synthesize(instance, 'dr-pwb')
    W = instance.regret_weight('identity')
    exact = single_ellipsoid_level(
        result.phi, instance.cost, instance.benchmark, W,
        instance.x0, instance.pointwise.P
    )
    assert exact == pytest.approx(result.mu, rel=1e-3, abs=1e-6)


def test_single_ellipsoid_needs_one_step(di_system):
    sys, cost = di_system
    phi = closed_loop_response(sys, Controller.zeros(sys))
    with pytest.raises(DimensionMismatchError):
        single_ellipsoid_level(
            phi, cost, np.zeros((8, 8)), np.eye(8), np.zeros(2), np.eye(2)
        )


def test_polytope_level_below_pointwise_level(di_instance):
    result = synthesize(di_instance, 'dr-pwb')
    W = di_instance.regret_weight('identity')
    r = 0.1 / np.sqrt(2)
    vertices = np.array([[r, r], [r, -r], [-r, r], [-r, -r]])
    level = polytopic_exact_level(
        result.phi, di_instance.cost, di_instance.benchmark, W,
        di_instance.x0, vertices
    )
    assert 0.0 <= level <= result.mu + 1e-6


def test_polytope_budget(di_instance):
    phi = closed_loop_response(di_instance.sys, Controller.zeros(di_instance.sys))
    with pytest.raises(CombinatorialBudgetError):
        polytopic_exact_level(
            phi, di_instance.cost, di_instance.benchmark, np.eye(8),
            di_instance.x0, np.eye(2), budget=7
        )


def test_local_lower_bound_below_pointwise_level(di_instance):
    result = synthesize(di_instance, 'dr-pwb')
    W = di_instance.regret_weight('identity')
    P = di_instance.pointwise.P
    lower = local_level_lower_bound(
        result.phi, di_instance.cost, di_instance.benchmark, W,
        di_instance.x0, P, restarts=10
    )
    assert 0.0 <= lower <= result.mu + 1e-6
    again = local_level_lower_bound(
        result.phi, di_instance.cost, di_instance.benchmark, W,
        di_instance.x0, P, restarts=10
    )
    assert again == lower


def test_local_lower_bound_finds_single_step_level():
    instance = pointwise_instance(T=1)
    result = synthesize(instance, 'dr-pwb')
    W = instance.regret_weight('identity')
    args = (
        result.phi, instance.cost, instance.benchmark, W,
        instance.x0, instance.pointwise.P
    )
    exact = single_ellipsoid_level(*args)
    assert local_level_lower_bound(*args) == pytest.approx(
        exact, rel=1e-3, abs=1e-6
    )


def test_energy_ball_worst_direction_attains_level(rng):
    omega = 2.0
    for _ in range(3):
        sys = random_system(rng, T=3)
        cost = random_cost(rng, T=3)
        O = noncausal_cost_operator(sys, cost)
        W = RegretWeight.identity(sys.delta_dim, sys.n)
        result = synth_energy_ball(sys, cost, O, W, np.zeros(2), omega)
        assert result.ok
        assert result.mu > 1e-6

        worst = worst_case_disturbance_zero_init(result.phi, cost, O.O3, W.W3)
        w = worst.w.ravel() * np.sqrt(omega) / np.linalg.norm(worst.w)
        delta = np.concatenate((np.zeros(2), w))
        R = regret_matrix(result.phi, cost, O)
        assert delta @ R @ delta >= 0.999 * result.mu * (delta @ W.W @ delta)


def test_sample_certificate_for_pointwise_level(di_instance):
    result = synthesize(di_instance, 'cr-pwb')
    W = di_instance.regret_weight('benchmark')
    excess = sample_certificate(
        result.phi, di_instance.cost, di_instance.benchmark, W,
        di_instance.pointwise, result.mu, n_samples=2000
    )
    assert excess <= 1e-6


def test_pointwise_samples_stay_inside(di_instance):
    model = PointwiseEllipsoid(np.diag([4.0, 9.0]), np.zeros(2))
    assert model.contains([[0.5, 0.0], [0.0, 1 / 3]])
    assert not model.contains([[0.6, 0.0]])


def test_chain_report_lines():
    report = ChainReport(
        mu_energy=2.0, mu_pointwise=1.5, floor=2 / np.pi,
        lower_estimate=1.2, omega=0.03, tol=1e-6,
    )
    assert report.holds
    assert report.reduction == pytest.approx(25.0)
    assert report.soft_gap == 0.0
    assert report.lines()[-1] == 'chain holds: True'


def test_chain_fails_without_levels():
    report = ChainReport(
        mu_energy=None, mu_pointwise=1.0, floor=0.5,
        lower_estimate=None, omega=1.0, tol=1e-6,
    )
    assert not report.holds
    assert report.soft_gap is None
