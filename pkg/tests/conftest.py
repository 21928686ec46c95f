import numpy as np
import pytest

from regretsynth.operators import CostSpec, LTVSystem
from regretsynth.synthesis import ConstraintSpec, Instance, PointwiseEllipsoid


def random_system(
    rng: np.random.Generator,
    n: int = 2,
    m: int = 1,
    p: int = 2,
    T: int = 3,
) -> LTVSystem:
    '''A random time-varying system with mildly stable dynamics.'''
    A_seq = [np.eye(n) + 0.3 * rng.standard_normal((n, n)) for _ in range(T + 1)]
    B_seq = [rng.standard_normal((n, m)) for _ in range(T + 1)]
    E_seq = [
        np.hstack((np.eye(n), 0.5 * rng.standard_normal((n, p - n))))
        for _ in range(T)
    ]
    return LTVSystem(A_seq, B_seq, E_seq)


def random_cost(
    rng: np.random.Generator,
    n: int = 2,
    m: int = 1,
    T: int = 3,
) -> CostSpec:
    Q_seq, R_seq = [], []
    for _ in range(T + 1):
        M = rng.standard_normal((n, n))
        Q_seq.append(M @ M.T + 0.1 * np.eye(n))
        R_seq.append(np.eye(m) * rng.uniform(0.5, 2.0))
    return CostSpec(Q_seq, R_seq)


def double_integrator(T: int = 3, dt: float = 0.2) -> tuple[LTVSystem, CostSpec]:
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.5 * dt**2], [dt]])
    sys = LTVSystem.time_invariant(A, B, np.eye(2), T)
    cost = CostSpec.time_invariant(np.eye(2), np.eye(1), T)
    return sys, cost


def pointwise_instance(
    T: int = 3,
    P: float = 100.0,
    x0=(1.0, 0.0),
    constraints: bool = False,
    **kwargs,
) -> Instance:
    sys, cost = double_integrator(T)
    spec = None
    if constraints:
        spec = ConstraintSpec.from_bounds(2, 1, (3.0, 2.0), (4.0,))
    return Instance(
        sys=sys,
        cost=cost,
        model=PointwiseEllipsoid(P * np.eye(2), np.asarray(x0)),
        constraints=spec,
        **kwargs,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def scalar_system() -> tuple[LTVSystem, CostSpec]:
    '''``A = B = E = Q = R = 1`` over one step.'''
    sys = LTVSystem.time_invariant(1.0, 1.0, 1.0, 1)
    cost = CostSpec.time_invariant(1.0, 1.0, 1)
    return sys, cost


@pytest.fixture
def di_system() -> tuple[LTVSystem, CostSpec]:
    return double_integrator(T=3)


@pytest.fixture
def di_instance() -> Instance:
    return pointwise_instance(T=3)
