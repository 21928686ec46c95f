import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from regretsynth.config import InstanceConfig
from regretsynth.constants import FAMILY_KINDS, TABLE_VARIANTS
from regretsynth.errors import DimensionMismatchError, InvalidParameterError
from regretsynth.slp import Controller, closed_loop_response
from regretsynth.sim import (
    DisturbanceFamily,
    benchmark_table,
    default_families,
    evaluate_run,
    generate,
    read_table,
    rollout,
    sample_ball,
    write_table,
)
from regretsynth.synthesis import PointwiseEllipsoid, synthesize

from conftest import double_integrator, random_system


@pytest.fixture
def target() -> PointwiseEllipsoid:
    return PointwiseEllipsoid(100.0 * np.eye(2), np.array([1.0, 0.0]))


def random_controller(rng, sys):
    return Controller([
        0.5 * rng.standard_normal((sys.m, sys.n * (k + 1)))
        for k in range(sys.horizon + 1)
    ])


def test_constant_family(target):
    sys, _ = double_integrator(T=3)
    seqs = generate(DisturbanceFamily('constant', target), sys, 3, 2, seed=0)
    assert len(seqs) == 2
    assert_allclose(seqs[0], [[0.1, 0.0]] * 3)


def test_step_and_stair_shapes(target):
    step = DisturbanceFamily('step', target).shape(6)
    assert_allclose(step, [0, 0, 0, 1, 1, 1])
    stair = DisturbanceFamily('stair', target, stair_width=2).shape(6)
    assert_allclose(stair, np.array([1, 1, 2, 2, 3, 3]) / 3)


def test_sinusoid_peaks_at_one(target):
    s = DisturbanceFamily('sinusoidal', target, period=4).shape(8)
    assert s[0] == pytest.approx(1.0)
    assert np.abs(s).max() == pytest.approx(1.0)


@pytest.mark.parametrize('kind', FAMILY_KINDS)
def test_samples_stay_in_the_set(kind, target):
    sys, _ = double_integrator(T=6)
    for w in generate(DisturbanceFamily(kind, target), sys, 6, 50, seed=3):
        assert w.shape == (6, 2)
        assert target.contains(w)


@pytest.mark.parametrize('kind', ['truncated_gaussian', 'uniform_ellipsoid'])
def test_random_families_are_seeded(kind, target):
    sys, _ = double_integrator(T=4)
    family = DisturbanceFamily(kind, target)
    first = generate(family, sys, 4, 5, seed=11)
    again = generate(family, sys, 4, 5, seed=11)
    other = generate(family, sys, 4, 5, seed=12)
    for a, b in zip(first, again):
        assert_allclose(a, b)
    assert not np.allclose(first[0], other[0])
    assert not np.allclose(first[0], first[1])


def test_time_varying_ellipsoids():
    sys, _ = double_integrator(T=2)
    target = PointwiseEllipsoid(
        [np.eye(2), 25.0 * np.eye(2)], np.zeros(2)
    )
    w = generate(DisturbanceFamily('constant', target), sys, 2, 1, 0)[0]
    assert_allclose(w, [[1.0, 0.0], [0.2, 0.0]])


def test_family_validation(target):
    with pytest.raises(InvalidParameterError):
        DisturbanceFamily('impulse', target)
    with pytest.raises(InvalidParameterError):
        DisturbanceFamily('constant', target, amplitude=1.5)
    with pytest.raises(InvalidParameterError):
        DisturbanceFamily('constant', target, direction=[0.0, 0.0])
    with pytest.raises(InvalidParameterError):
        DisturbanceFamily('stair', target, stair_width=0)
    sys, _ = double_integrator(T=3)
    with pytest.raises(InvalidParameterError):
        generate(DisturbanceFamily('constant', target), sys, 3, 0, 0)


def test_ball_samples_inside(rng):
    for _ in range(100):
        assert np.linalg.norm(sample_ball(rng, 5, 0.3)) <= 0.3


def test_rollout_matches_response(rng):
    sys = random_system(rng, n=2, m=1, p=3, T=4)
    K = random_controller(rng, sys)
    phi = closed_loop_response(sys, K)
    x0 = rng.standard_normal(2)
    w = rng.standard_normal((4, 3))
    x, u = rollout(sys, K, x0, w)
    x_phi, u_phi = phi.apply(np.concatenate((x0, w.ravel())))
    assert_allclose(x, x_phi, atol=1e-10)
    assert_allclose(u, u_phi, atol=1e-10)


def test_rollout_is_linear(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=3)
    K = random_controller(rng, sys)
    x0a, x0b = rng.standard_normal(2), rng.standard_normal(2)
    wa, wb = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
    xa, ua = rollout(sys, K, x0a, wa)
    xb, ub = rollout(sys, K, x0b, wb)
    x, u = rollout(sys, K, 2 * x0a - x0b, 2 * wa - wb)
    assert_allclose(x, 2 * xa - xb, atol=1e-10)
    assert_allclose(u, 2 * ua - ub, atol=1e-10)


def test_rollout_checks_lengths(rng):
    sys = random_system(rng, n=2, m=1, p=2, T=3)
    with pytest.raises(DimensionMismatchError):
        rollout(sys, Controller.zeros(sys), np.zeros(2), np.zeros((2, 2)))


def test_run_record_against_benchmark(di_instance):
    result = synthesize(di_instance, 'dr-pwb')
    w = np.full((3, 2), 0.05)
    record = evaluate_run(
        di_instance.sys, di_instance.cost, di_instance.benchmark,
        result.controller, di_instance.x0, w, 'dr-pwb', 'manual',
        keep_trajectory=True,
    )
    assert record.regret >= -1e-9
    assert record.competitive_ratio >= 1.0 - 1e-9
    assert record.regret == pytest.approx(record.cost - record.benchmark_cost)
    assert record.states.shape == (4, 2)
    assert record.violation is None


def test_benchmark_table(di_instance, tmp_path):
    controllers = {
        variant: synthesize(di_instance, variant).controller
        for variant in ('h2', 'dr-pwb')
    }
    families = default_families(di_instance.pointwise)
    table = benchmark_table(controllers, families, di_instance, 5, seed=1)
    assert list(table.columns) == ['h2', 'dr-pwb']
    assert list(table.index) == list(FAMILY_KINDS)
    assert_allclose(table.min(axis=1), 1.0)
    assert (table.to_numpy() >= 1.0 - 1e-12).all()

    file = tmp_path / 'table.csv'
    write_table(table, file)
    again = read_table(file)
    pd.testing.assert_frame_equal(again, table, atol=1e-6, check_names=False)

    repeat = benchmark_table(controllers, families, di_instance, 5, seed=1)
    pd.testing.assert_frame_equal(repeat, table)


def test_benchmark_table_needs_controllers(di_instance):
    with pytest.raises(ValueError):
        benchmark_table({}, default_families(di_instance.pointwise), di_instance, 1, 0)


def test_full_table_on_example_instance():
    instance = InstanceConfig.example().to_instance()
    controllers = {}
    for variant in TABLE_VARIANTS:
        result = synthesize(instance, variant)
        assert result.ok, (variant, result.status)
        controllers[variant] = result.controller
    families = default_families(instance.pointwise)
    table = benchmark_table(controllers, families, instance, 5, seed=0)

    assert table.shape == (len(FAMILY_KINDS), len(TABLE_VARIANTS))
    assert list(table.columns) == list(TABLE_VARIANTS)
    assert (table.min(axis=1) == 1.0).all()
    for kind in ('constant', 'sinusoidal', 'step'):
        assert table.loc[kind, 'dr-pwb'] <= table.loc[kind, 'dr-energy'] + 1e-9
