'''
Closed-loop simulation, benchmark disturbance families and the
normalised cost table comparing controllers across them.
'''

__all__ = (
    'DisturbanceFamily',
    'RunRecord',
    'benchmark_table',
    'default_families',
    'evaluate_run',
    'family_rng',
    'generate',
    'read_table',
    'rollout',
    'sample_ball',
    'sample_ellipsoid',
    'write_table',
)


import logging
from dataclasses import dataclass, field
from os import PathLike

import numpy as np
import pandas as pd
from scipy.stats import chi2

from .constants import FAMILY_KINDS
from .errors import DimensionMismatchError, InvalidParameterError
from .operators import BenchmarkOperator, CostSpec, LTVSystem, evaluate_cost
from .operators import stack_delta
from .slp import Controller
from .synthesis import ConstraintSpec, Instance, PointwiseEllipsoid
from .utils import inv_sqrt, join_options
from ._types import DisturbanceSeq, FamilyKind, InputSeq, Matrix, StateSeq

from collections.abc import Mapping, Sequence


logger = logging.getLogger(__name__)


RANDOM_KINDS: tuple[FamilyKind, ...] = ('truncated_gaussian', 'uniform_ellipsoid')

# Gaussian samples are scaled so half of them land inside the ellipsoid:
ACCEPTANCE = 0.5


@dataclass(frozen=True, eq=False)
class DisturbanceFamily:
    '''
    A recipe for disturbance sequences inside the pointwise set
    ``{w | w' P_k w <= 1}``.

    Deterministic kinds follow a scalar shape ``s_k`` with peak magnitude
    1 along `direction`, scaled so the peak reaches ``amplitude`` times
    the boundary of the set.

    :param kind: One of :obj:`constants.FAMILY_KINDS`
    :param target: The pointwise set the samples lie in
    :param amplitude: Fraction of the boundary reached, in ``(0, 1]``
    :param direction: The disturbance direction of deterministic kinds,
        defaults to the first coordinate axis
    :param period: Period in steps of ``'sinusoidal'`` and ``'sawtooth'``,
        defaults to half the horizon (at least 2)
    :param step_time: Onset of ``'step'``, defaults to half the horizon
    :param stair_width: Steps per stair level, defaults to a quarter of
        the horizon (at least 1)

    :raises: :exc:`errors.InvalidParameterError` for an unknown kind or
        out-of-range parameters
    '''
    kind: FamilyKind
    target: PointwiseEllipsoid
    amplitude: float = 1.0
    direction: Matrix | None = None
    period: int | None = None
    step_time: int | None = None
    stair_width: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in FAMILY_KINDS:
            raise InvalidParameterError(
                f"Unknown disturbance family {self.kind!r}, expected "
                + join_options(FAMILY_KINDS)
            )
        if not 0.0 < self.amplitude <= 1.0:
            raise InvalidParameterError(
                f"Amplitude must lie in (0, 1], got {self.amplitude}."
            )
        for name in ('period', 'step_time', 'stair_width'):
            val = getattr(self, name)
            if val is not None and val < (2 if name == 'period' else 0):
                raise InvalidParameterError(f"Invalid {name}: {val}.")
        if self.stair_width == 0:
            raise InvalidParameterError("Stairs need a positive width.")
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float).ravel()
            if d.size != self.target.p or not np.any(d):
                raise InvalidParameterError(
                    f"Direction must be a nonzero vector of length"
                    f" {self.target.p}."
                )
            d.setflags(write=False)
            object.__setattr__(self, 'direction', d)

    @property
    def index(self) -> int:
        '''The family's position in :obj:`constants.FAMILY_KINDS`.'''
        return FAMILY_KINDS.index(self.kind)

    @property
    def random(self) -> bool:
        return self.kind in RANDOM_KINDS

    def shape(self, horizon: int) -> np.ndarray:
        '''The scalar profile ``s_k`` with ``max |s_k| = 1``.'''
        T = horizon
        k = np.arange(T)
        period = self.period or max(2, T // 2)
        match self.kind:
            case 'constant':
                s = np.ones(T)
            case 'sinusoidal':
                s = np.sin(2.0 * np.pi * k / period + np.pi / 2.0)
            case 'sawtooth':
                s = 2.0 * (k % period) / (period - 1) - 1.0
            case 'step':
                onset = T // 2 if self.step_time is None else self.step_time
                s = (k >= onset).astype(float)
            case 'stair':
                width = self.stair_width or max(1, T // 4)
                s = (k // width + 1).astype(float)
            case _:
                raise InvalidParameterError(
                    f"{self.kind!r} has no deterministic shape."
                )
        peak = np.abs(s).max(initial=0.0)
        if peak == 0.0:
            raise InvalidParameterError(
                f"The {self.kind!r} profile is zero over {T} steps."
            )
        return s / peak


def family_rng(seed: int, family: DisturbanceFamily, realisation: int):
    '''An independent stream per seed, family and realisation.'''
    return np.random.default_rng([seed, family.index, realisation])


def sample_ellipsoid(
    rng: np.random.Generator,
    P: Matrix,
    root: Matrix | None = None,
) -> np.ndarray:
    '''A uniform sample from ``{w | w' P w <= 1}``.'''
    p = P.shape[0]
    root = inv_sqrt(P) if root is None else root
    v = rng.standard_normal(p)
    v *= rng.uniform() ** (1.0 / p) / np.linalg.norm(v)
    return root @ v


def sample_ball(
    rng: np.random.Generator,
    dim: int,
    radius: float,
) -> np.ndarray:
    '''A uniform sample from the ball of the given radius.'''
    v = rng.standard_normal(dim)
    return radius * rng.uniform() ** (1.0 / dim) * v / np.linalg.norm(v)


def _truncated_gaussian(rng, P, root, scale) -> np.ndarray:
    while True:
        w = scale * (root @ rng.standard_normal(P.shape[0]))
        if w @ P @ w <= 1.0:
            return w


def generate(
    family: DisturbanceFamily,
    sys: LTVSystem,
    horizon: int,
    n_realisations: int,
    seed: int,
) -> list[DisturbanceSeq]:
    '''
    Draw disturbance sequences of shape ``(horizon, p)`` from `family`.

    Random kinds use one stream per realisation (see :func:`family_rng`),
    so results depend only on `seed`. Deterministic kinds return the same
    sequence for every realisation.

    :param family: The recipe
    :param sys: The system the sequences drive
    :param horizon: Number of steps
    :param n_realisations: How many sequences to draw
    :param seed: The base seed

    :raises: :exc:`errors.InvalidParameterError` for a non-positive count
    '''
    if n_realisations < 1:
        raise InvalidParameterError(
            f"Need at least one realisation, got {n_realisations}."
        )
    if family.target.p != sys.p:
        raise DimensionMismatchError(
            f"Family of dimension {family.target.p} for a system with"
            f" p = {sys.p}."
        )
    P_seq = family.target.P_seq(horizon)
    roots = [inv_sqrt(P) for P in P_seq]

    if not family.random:
        s = family.shape(horizon)
        d = family.direction
        if d is None:
            d = np.eye(sys.p)[0]
        w = np.array([
            family.amplitude * s_k * d / np.sqrt(d @ P @ d)
            for s_k, P in zip(s, P_seq)
        ])
        w.setflags(write=False)
        return [w] * n_realisations

    scale = 1.0 / np.sqrt(chi2.ppf(ACCEPTANCE, sys.p))
    out = []
    for r in range(n_realisations):
        rng = family_rng(seed, family, r)
        match family.kind:
            case 'truncated_gaussian':
                w = [
                    _truncated_gaussian(rng, P, root, scale)
                    for P, root in zip(P_seq, roots)
                ]
            case 'uniform_ellipsoid':
                w = [
                    sample_ellipsoid(rng, P, root)
                    for P, root in zip(P_seq, roots)
                ]
        out.append(family.amplitude * np.array(w).reshape(horizon, sys.p))
    return out


def default_families(target: PointwiseEllipsoid) -> list[DisturbanceFamily]:
    '''One family of every kind with default parameters, in table order.'''
    return [DisturbanceFamily(kind, target) for kind in FAMILY_KINDS]


def rollout(
    sys: LTVSystem,
    controller: Controller,
    x0: Matrix,
    w_seq: DisturbanceSeq,
) -> tuple[StateSeq, InputSeq]:
    '''
    Simulate ``u_k = sum_{j<=k} K_{k,j} x_j`` step by step.

    :returns: States ``(T + 1, n)`` and inputs ``(T + 1, m)``
    '''
    n, m, T = sys.n, sys.m, sys.horizon
    if (controller.n, controller.m, controller.horizon) != (n, m, T):
        raise DimensionMismatchError(
            f"Controller with (n, m, T) ="
            f" {(controller.n, controller.m, controller.horizon)}"
            f" does not fit a system with {(n, m, T)}."
        )
    x0 = np.asarray(x0, dtype=float).ravel()
    w_seq = np.asarray(w_seq, dtype=float).reshape(-1, sys.p)
    if x0.size != n or len(w_seq) != T:
        raise DimensionMismatchError(
            f"Expected x0 of length {n} and {T} disturbances,"
            f" got {x0.size} and {len(w_seq)}."
        )
    x = np.zeros((T + 1, n))
    u = np.zeros((T + 1, m))
    x[0] = x0
    for k in range(T + 1):
        u[k] = controller.rows[k] @ x[:k+1].ravel()
        if k < T:
            x[k+1] = (
                sys.A_seq[k] @ x[k] + sys.B_seq[k] @ u[k]
                + sys.E_seq[k] @ w_seq[k]
            )
    return x, u


@dataclass(frozen=True, eq=False)
class RunRecord:
    '''
    One closed-loop run.

    :param regret: ``cost - benchmark_cost``
    :param competitive_ratio: ``cost / benchmark_cost``, ``None`` when the
        benchmark cost is below ``1e-12``
    :param violation: The largest constraint row value, ``None`` without
        constraints
    '''
    controller: str
    family: str
    cost: float
    benchmark_cost: float
    regret: float
    competitive_ratio: float | None
    violation: float | None = None
    states: StateSeq | None = field(default=None, repr=False)
    inputs: InputSeq | None = field(default=None, repr=False)


def evaluate_run(
    sys: LTVSystem,
    cost: CostSpec,
    O: BenchmarkOperator,
    controller: Controller,
    x0: Matrix,
    w_seq: DisturbanceSeq,
    controller_id: str = '',
    family_id: str = '',
    constraints: ConstraintSpec | None = None,
    keep_trajectory: bool = False,
) -> RunRecord:
    '''
    Roll out `controller` and compare its cost with the benchmark cost
    ``delta' O delta`` of the same disturbance.
    '''
    x, u = rollout(sys, controller, x0, w_seq)
    J = evaluate_cost(sys, cost, x0, u, w_seq)
    J_star = O.cost(stack_delta(x0, w_seq))
    ratio = J / J_star if J_star > 1e-12 else None
    violation = (
        constraints.max_value(x, u) if constraints is not None else None
    )
    return RunRecord(
        controller=controller_id,
        family=family_id,
        cost=J,
        benchmark_cost=J_star,
        regret=J - J_star,
        competitive_ratio=ratio,
        violation=violation,
        states=x if keep_trajectory else None,
        inputs=u if keep_trajectory else None,
    )


def benchmark_table(
    controllers: Mapping[str, Controller],
    families: Sequence[DisturbanceFamily],
    instance: Instance,
    n_realisations: int,
    seed: int,
    normalise: bool = True,
) -> pd.DataFrame:
    '''
    Mean closed-loop cost per family (rows) and controller (columns),
    each row divided by its minimum so the best controller shows 1.

    :param controllers: Controllers by id, in column order
    :param families: Disturbance families, in row order
    :param instance: The problem the controllers were synthesised for
    :param n_realisations: Realisations per random family
    :param seed: The base seed
    :param normalise: Divide rows by their minimum

    :rtype: :class:`pandas.DataFrame`
    '''
    if not controllers:
        raise ValueError("The table needs at least one controller.")
    sys, cost, x0 = instance.sys, instance.cost, instance.x0
    O = instance.benchmark
    rows = {}
    for family in families:
        seqs = generate(family, sys, sys.horizon, n_realisations, seed)
        rows[family.kind] = {
            cid: np.mean([
                evaluate_run(sys, cost, O, K, x0, w, cid, family.kind).cost
                for w in seqs
            ])
            for cid, K in controllers.items()
        }
        logger.debug(f"Simulated family {family.kind!r}")
    table = pd.DataFrame.from_dict(rows, orient='index')
    table = table[list(controllers)]
    table.index.name = 'family'
    if normalise:
        table = table.div(table.min(axis=1), axis=0)
    return table


def write_table(table: pd.DataFrame, file: PathLike) -> None:
    '''Write a table as CSV with a ``family`` header column.'''
    table.to_csv(file, index_label='family', float_format='%.6f')


def read_table(file: PathLike) -> pd.DataFrame:
    return pd.read_csv(file, index_col='family')
