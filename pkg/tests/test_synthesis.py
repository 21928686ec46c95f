import numpy as np
import pytest

from regretsynth.errors import (
    DimensionMismatchError,
    InfeasibleBenchmarkError,
    NotPositiveSemidefiniteError,
)
from regretsynth.operators import CostSpec, noncausal_cost_operator
from regretsynth.synthesis import (
    ConstraintSpec,
    EnergyBall,
    Instance,
    PointwiseEllipsoid,
    RegretWeight,
    ZeroInit,
    constrained_noncausal_benchmark,
    synth_adversarial_init,
    synth_dynamic_regret_reference,
    synth_energy_ball,
    synth_h2,
    synth_hinf,
    synth_pointwise,
    synth_zero_init,
    synthesize,
)
from regretsynth.utils import inv_sqrt
from regretsynth.verify import (
    check_inequality_chain,
    tight_level_adversarial,
    tight_level_zero_init,
)

from conftest import double_integrator, pointwise_instance, random_cost, random_system


def riccati_h2(sys, cost):
    '''``tr P_0 + sum_k tr(E_k' P_{k+1} E_k)`` for unit-covariance
    initial state and disturbances.'''
    T = sys.horizon
    P = cost.Q_seq[T]
    P_seq = [P]
    for k in range(T - 1, -1, -1):
        A, B = sys.A_seq[k], sys.B_seq[k]
        gain = np.linalg.solve(cost.R_seq[k] + B.T @ P @ B, B.T @ P @ A)
        P = cost.Q_seq[k] + A.T @ P @ A - A.T @ P @ B @ gain
        P_seq.append(P)
    P_seq.reverse()
    return np.trace(P_seq[0]) + sum(
        np.trace(sys.E_seq[k].T @ P_seq[k + 1] @ sys.E_seq[k])
        for k in range(T)
    )


def test_zero_init_level_is_tight(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    result = synth_zero_init(sys, cost, O, W)
    assert result.status == 'optimal'
    tight = tight_level_zero_init(result.phi, cost, O.O3, W.W3)
    assert result.mu == pytest.approx(tight, rel=1e-5, abs=1e-7)
    assert result.residuals['achievability'] <= 1e-6


def test_zero_state_cost_needs_no_regret(di_system):
    sys, _ = di_system
    cost = CostSpec.time_invariant(np.zeros((2, 2)), np.eye(1), sys.horizon)
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    result = synth_zero_init(sys, cost, O, W)
    assert result.ok
    assert result.mu == pytest.approx(0.0, abs=1e-6)


def test_adversarial_init_dominates_zero_init(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    zero = synth_zero_init(sys, cost, O, W)
    adv = synth_adversarial_init(sys, cost, O, W)
    assert adv.mu >= zero.mu - 1e-6
    tight = tight_level_adversarial(adv.phi, cost, O, W)
    assert adv.mu == pytest.approx(tight, rel=1e-5, abs=1e-7)


def test_hinf_level_dominates_dynamic_regret(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    hinf = synth_hinf(sys, cost)
    regret = synth_zero_init(sys, cost, O, W)
    assert hinf.ok and regret.ok
    assert hinf.mu >= regret.mu - 1e-6
    assert hinf.diagnostics['gamma'] == pytest.approx(np.sqrt(hinf.mu))


@pytest.mark.parametrize('seed', [0, 1])
def test_h2_matches_riccati(seed):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, n=2, m=1, p=2, T=3)
    cost = random_cost(rng, n=2, m=1, T=3)
    result = synth_h2(sys, cost)
    assert result.ok
    assert result.mu == pytest.approx(riccati_h2(sys, cost), rel=1e-5)
    assert result.diagnostics['h2_norm'] ** 2 == pytest.approx(result.mu)


def test_dynamic_regret_reference_agrees(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    x0 = np.array([1.0, -0.5])
    ours = synth_energy_ball(sys, cost, O, W, x0, omega=2.0)
    ref = synth_dynamic_regret_reference(sys, cost, O, x0, omega=2.0)
    assert ours.ok and ref.ok
    assert ours.mu == pytest.approx(ref.mu, rel=1e-4, abs=1e-7)
    assert ref.diagnostics['mu_hat'] == pytest.approx(
        ref.mu * (x0 @ x0 + 2.0)
    )


def test_energy_ball_bound_covers_sampled_disturbances(di_system, rng):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    x0 = np.array([0.5, 0.5])
    omega = 1.5
    result = synth_energy_ball(sys, cost, O, W, x0, omega)
    assert result.ok
    M = result.phi.cost_matrix(cost) - O.O - result.mu * W.W
    for _ in range(500):
        w = rng.standard_normal(sys.p * sys.horizon)
        w *= np.sqrt(omega) / np.linalg.norm(w) * rng.uniform() ** 0.5
        delta = np.concatenate((x0, w))
        assert delta @ M @ delta <= 1e-6


def test_competitive_ratio_bounded_by_dynamic_regret(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    dr = synth_adversarial_init(
        sys, cost, O, RegretWeight.identity(sys.delta_dim, sys.n)
    )
    cr_weight = RegretWeight.benchmark(O)
    cr = synth_adversarial_init(sys, cost, O, cr_weight)
    assert cr.ok and dr.ok
    sigma_min = np.linalg.eigvalsh(O.O)[0]
    assert cr.mu <= dr.mu / sigma_min * (1 + 1e-5) + 1e-6
    assert cr.competitive_ratio == pytest.approx(1.0 + cr.mu)
    assert dr.competitive_ratio is None


def test_singular_benchmark_weight_is_regularised(di_system):
    sys, _ = di_system
    cost = CostSpec.time_invariant(np.zeros((2, 2)), np.eye(1), sys.horizon)
    W = RegretWeight.benchmark(noncausal_cost_operator(sys, cost))
    assert W.epsilon > 0.0
    assert np.linalg.eigvalsh(W.W)[0] > 0.0


def test_pointwise_level_below_energy_level(di_instance):
    report = check_inequality_chain(di_instance, restarts=5)
    assert report.holds
    assert report.mu_pointwise <= report.mu_energy + 1e-6
    assert report.floor == pytest.approx(2 / np.pi)
    assert report.lower_estimate <= report.mu_pointwise + 1e-5


def test_pointwise_multipliers(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    result = synth_pointwise(
        sys, cost, O, W, np.array([1.0, 0.0]), 100.0 * np.eye(2)
    )
    assert result.ok
    assert len(result.lambdas) == sys.horizon
    assert min(result.lambdas) >= -1e-7
    assert result.diagnostics['omega_equivalent'] == pytest.approx(0.03)


def test_pointwise_ellipsoid_dimension_checked(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    with pytest.raises(DimensionMismatchError):
        synth_pointwise(sys, cost, O, W, np.zeros(2), np.eye(3))


def test_pointwise_ellipsoid_must_be_definite():
    with pytest.raises(NotPositiveSemidefiniteError) as info:
        PointwiseEllipsoid([np.eye(2), np.diag([1.0, 0.0])], np.zeros(2))
    assert info.value.index == 1


@pytest.mark.parametrize('variant', ['dr-pwb', 'cr-pwb', 'h2', 'hinf'])
def test_constraints_hold_for_every_disturbance(variant, rng):
    instance = pointwise_instance(T=3, constraints=True)
    result = synthesize(instance, variant)
    assert result.ok, result.status
    assert result.residuals['constraints'] <= 1e-6
    spec = instance.constraints
    P = instance.pointwise.P
    for _ in range(300):
        w = rng.standard_normal((3, 2))
        w /= np.sqrt(np.einsum('ij,jk,ik->i', w, P, w))[:, None]
        delta = np.concatenate((instance.x0, w.ravel()))
        x, u = result.phi.apply(delta)
        assert spec.max_value(x, u) <= 1.0 + 1e-6


def test_unreachable_constraints_are_infeasible():
    instance = pointwise_instance(T=3)
    instance.constraints = ConstraintSpec.from_bounds(2, 1, (0.5, 0.5), (4.0,))
    result = synthesize(instance, 'dr-pwb')
    assert result.status == 'infeasible'
    assert result.mu is None and result.controller is None


def test_constraints_can_be_switched_off():
    instance = pointwise_instance(T=3)
    instance.constraints = ConstraintSpec.from_bounds(2, 1, (0.5, 0.5), (4.0,))
    assert synthesize(instance, 'dr-pwb', constraints=False).ok


def test_synthesize_labels_result(di_instance):
    result = synthesize(di_instance, 'dr-energy')
    assert result.variant == 'dr-energy'
    assert result.diagnostics['program'] == 'energy_ball'
    assert result.weight == 'identity'
    assert result.diagnostics['omega'] == pytest.approx(0.03)


def test_custom_weight_uses_instance_model():
    sys, cost = double_integrator(T=2)
    W = np.diag(np.linspace(1.0, 2.0, sys.delta_dim))
    instance = Instance(sys, cost, ZeroInit(), weight=W)
    result = synthesize(instance, 'custom-weight')
    assert result.ok
    assert result.weight == 'custom'
    assert result.diagnostics['program'] == 'zero_init'


def test_energy_variants_need_a_bound():
    sys, cost = double_integrator(T=2)
    instance = Instance(sys, cost, ZeroInit())
    with pytest.raises(ValueError):
        synthesize(instance, 'dr-energy')
    with pytest.raises(ValueError):
        synthesize(instance, 'dr-pwb')


def test_energy_model_instance():
    sys, cost = double_integrator(T=2)
    instance = Instance(sys, cost, EnergyBall(1.0, np.array([1.0, 0.0])))
    result = synthesize(instance, 'cr-energy')
    assert result.ok
    assert result.competitive_ratio >= 1.0 - 1e-6


def test_unknown_variant_rejected(di_instance):
    with pytest.raises(ValueError):
        synthesize(di_instance, 'lqr')


def test_explicit_zero_energy_bound_is_kept():
    sys, cost = double_integrator(T=2)
    x0 = np.array([1.0, 0.0])
    instance = Instance(sys, cost, EnergyBall(1.0, x0), omega=0.0)
    result = synthesize(instance, 'custom-weight')
    assert result.ok
    assert result.diagnostics['omega'] == 0.0


@pytest.mark.parametrize('objective', ['frobenius', 'operator'])
def test_unconstrained_benchmark_is_the_noncausal_optimum(di_system, objective):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    constrained = constrained_noncausal_benchmark(
        sys, cost, ConstraintSpec.from_bounds(2, 1), 100.0 * np.eye(2),
        np.array([1.0, 0.0]), objective=objective,
    )
    gap = constrained.O - O.O
    assert np.linalg.eigvalsh(gap)[0] >= -1e-6
    if objective == 'frobenius':
        assert np.trace(gap) == pytest.approx(0.0, abs=1e-5 * np.trace(O.O))
    else:
        # The operator-norm minimiser is not unique; only its norm is.
        top = np.linalg.eigvalsh(constrained.O)[-1]
        assert top == pytest.approx(np.linalg.eigvalsh(O.O)[-1], rel=1e-4)


def test_binding_input_bound_raises_benchmark(di_system):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    spec = ConstraintSpec.from_bounds(2, 1, input_bounds=(0.05,))
    constrained = constrained_noncausal_benchmark(
        sys, cost, spec, 100.0 * np.eye(2), np.array([1.0, 0.0])
    )
    gap = constrained.O - O.O
    assert np.linalg.eigvalsh(gap)[0] >= -1e-6
    assert np.trace(gap) > 1e-4


def test_unreachable_benchmark_constraints(di_system):
    sys, cost = di_system
    spec = ConstraintSpec.from_bounds(2, 1, (0.5, 0.5))
    with pytest.raises(InfeasibleBenchmarkError):
        constrained_noncausal_benchmark(
            sys, cost, spec, 100.0 * np.eye(2), np.array([1.0, 0.0])
        )


def worst_row_values(phi, spec, x0, P_seq):
    '''Each constraint row at its own worst pointwise disturbance.'''
    n, p, T = phi.n, phi.p, phi.horizon
    roots = [inv_sqrt(P) for P in P_seq]
    values = []
    for h in spec.Hz(T) @ phi.Phi:
        w = np.zeros((T, p))
        for j, root in enumerate(roots):
            v = root @ h[n + p*j:n + p*(j+1)]
            if np.linalg.norm(v) > 0.0:
                w[j] = root @ v / np.linalg.norm(v)
        delta = np.concatenate((x0, w.ravel()))
        values.append((h @ delta, delta))
    return values


@pytest.mark.parametrize('variant', ['dr-pwb', 'h2'])
def test_tightening_is_attained(variant):
    instance = pointwise_instance(T=3)
    instance.constraints = ConstraintSpec.from_bounds(2, 1, input_bounds=(0.05,))
    result = synthesize(instance, variant)
    assert result.ok, result.status
    P_seq = instance.pointwise.P_seq(3)
    values = worst_row_values(
        result.phi, instance.constraints, instance.x0, P_seq
    )
    for value, delta in values:
        assert value <= 1.0 + 1e-6
        for k, w in enumerate(delta[2:].reshape(3, 2)):
            assert w @ P_seq[k] @ w <= 1.0 + 1e-9
        x, u = result.phi.apply(delta)
        assert instance.constraints.max_value(x, u) <= 1.0 + 1e-6
    assert max(value for value, _ in values) >= 1.0 - 1e-5


@pytest.mark.parametrize('weight', ['identity', 'benchmark'])
def test_pointwise_improves_on_energy_ball(rng, weight):
    strict = 0
    for _ in range(10):
        sys = random_system(rng, T=3)
        cost = random_cost(rng, T=3)
        O = noncausal_cost_operator(sys, cost)
        W = (RegretWeight.identity(sys.delta_dim, sys.n)
             if weight == 'identity' else RegretWeight.benchmark(O))
        x0 = rng.standard_normal(2)
        P = np.diag(rng.uniform(5.0, 20.0, 2))
        model = PointwiseEllipsoid(P, x0)
        pwb = synth_pointwise(sys, cost, O, W, x0, P)
        energy = synth_energy_ball(
            sys, cost, O, W, x0, model.equivalent_omega(sys.horizon)
        )
        assert pwb.ok and energy.ok
        assert pwb.mu <= energy.mu + 1e-6
        strict += pwb.mu < energy.mu - 1e-6
    assert strict >= 8


@pytest.mark.parametrize('small, large', [
    (25.0, 100.0),
    (100.0, 400.0),
    (np.diag([50.0, 100.0]), np.diag([50.0, 400.0])),
    ([50.0 * np.eye(2)] * 3, [50.0 * np.eye(2), 80.0 * np.eye(2), 50.0 * np.eye(2)]),
])
def test_pointwise_level_shrinks_with_the_ellipsoids(di_system, small, large):
    sys, cost = di_system
    O = noncausal_cost_operator(sys, cost)
    W = RegretWeight.identity(sys.delta_dim, sys.n)
    x0 = np.array([1.0, 0.0])

    def level(P):
        P = P * np.eye(2) if np.isscalar(P) else P
        result = synth_pointwise(sys, cost, O, W, x0, P)
        assert result.ok
        return result.mu

    assert level(small) >= level(large) - 1e-6
