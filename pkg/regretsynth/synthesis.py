'''
Controller synthesis programs.

Every synthesis assembles a :class:`conic.ConicProgram` over the causal
entries of a system response ``Phi``, requires achievability, adds the
variant's performance LMI (and optionally tightened constraint rows),
solves it and recovers the controller.
'''

__all__ = (
    'AdversarialInit',
    'ConstraintSpec',
    'DisturbanceModel',
    'EnergyBall',
    'Instance',
    'PointwiseEllipsoid',
    'RegretWeight',
    'SynthesisResult',
    'ZeroInit',
    'add_ball_constraint_rows',
    'add_constraint_rows',
    'constrained_noncausal_benchmark',
    'synth_adversarial_init',
    'synth_dynamic_regret_reference',
    'synth_energy_ball',
    'synth_h2',
    'synth_hinf',
    'synth_pointwise',
    'synth_zero_init',
    'synthesize',
)


import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .conic import (
    AffineMatrix,
    ConicProgram,
    SolveReport,
    SolverSettings,
    bmat,
    solve,
)
from .constants import SYMMETRY_TOL, TOL_PD, VARIANTS
from .errors import (
    DimensionMismatchError,
    InfeasibleBenchmarkError,
    InvalidParameterError,
    NotPositiveSemidefiniteError,
    SingularResponseError,
)
from .operators import (
    BenchmarkOperator,
    CostSpec,
    LTVSystem,
    StackedOperators,
    build_stacked,
    noncausal_cost_operator,
)
from .slp import (
    Controller,
    SystemResponse,
    achievability_residual,
    causal_pattern,
    recover_controller,
)
from .utils import (
    as_matrix,
    condition_number,
    inv_sqrt,
    join_options,
    min_eig,
    symmetrize,
)
from ._types import (
    Matrix,
    Provenance,
    SolverStatus,
    VariantName,
    Vector,
    WeightChoice,
)

from collections.abc import Sequence
from typing import Any, Literal, Self


logger = logging.getLogger(__name__)


def _vector(x0, n: int | None = None) -> Vector:
    x0 = np.asarray(x0, dtype=float).ravel()
    if n is not None and x0.size != n:
        raise DimensionMismatchError(
            f"Initial state has length {x0.size}, expected {n}."
        )
    x0.setflags(write=False)
    return x0


@dataclass(frozen=True, eq=False)
class EnergyBall:
    '''
    Disturbances with total energy ``||w||^2 <= omega`` from a known
    initial state.
    '''
    omega: float
    x0: Vector

    def __post_init__(self) -> None:
        if not self.omega >= 0.0:
            raise InvalidParameterError(
                f"The energy bound must be nonnegative, got {self.omega}."
            )
        object.__setattr__(self, 'omega', float(self.omega))
        object.__setattr__(self, 'x0', _vector(self.x0))


@dataclass(frozen=True)
class ZeroInit:
    '''Unbounded disturbances from the origin; the level is a gain.'''
    pass


@dataclass(frozen=True)
class AdversarialInit:
    '''Unbounded disturbances and an adversarial initial state.'''
    pass


@dataclass(frozen=True, eq=False)
class PointwiseEllipsoid:
    '''
    Disturbances with ``w_k' P_k w_k <= 1`` at every step.

    :param P: One PD matrix used at every step, or one per step
    :type P: :class:`Matrix` | :class:`Sequence[Matrix]`

    :param x0: The known initial state
    :type x0: :class:`Vector`

    :raises: :exc:`errors.NotPositiveSemidefiniteError` naming the step
        of a matrix that is not symmetric positive definite
    '''
    P: Matrix | tuple[Matrix, ...]
    x0: Vector

    def __post_init__(self) -> None:
        raw = np.asarray(self.P, dtype=float)
        mats = [raw] if raw.ndim <= 2 else list(raw)
        mats = [as_matrix(mat, "P") for mat in mats]
        for k, mat in enumerate(mats):
            if mat.shape != mats[0].shape or mat.shape[0] != mat.shape[1]:
                raise DimensionMismatchError(
                    f"P_{k} has shape {mat.shape}, expected {mats[0].shape}."
                )
            if np.max(np.abs(mat - mat.T), initial=0.0) > SYMMETRY_TOL:
                raise NotPositiveSemidefiniteError(
                    f"P_{k} is not symmetric.", index=k
                )
            if min_eig(mat) < TOL_PD:
                raise NotPositiveSemidefiniteError(
                    f"P_{k} is not positive definite.", index=k
                )
        mats = [symmetrize(mat) for mat in mats]
        for mat in mats:
            mat.setflags(write=False)
        value = mats[0] if raw.ndim <= 2 else tuple(mats)
        object.__setattr__(self, 'P', value)
        object.__setattr__(self, 'x0', _vector(self.x0))

    @property
    def time_varying(self) -> bool:
        return isinstance(self.P, tuple)

    @property
    def p(self) -> int:
        return self.P_seq(None)[0].shape[0]

    def P_seq(self, horizon: int | None) -> tuple[Matrix, ...]:
        '''The per-step matrices, repeating a constant `P` `horizon` times.'''
        if self.time_varying:
            if horizon is not None and len(self.P) != horizon:
                raise DimensionMismatchError(
                    f"{len(self.P)} ellipsoids for horizon {horizon}."
                )
            return self.P
        return (self.P,) * (horizon or 1)

    def embedded(self, horizon: int) -> list[Matrix]:
        '''
        The matrices picking ``w_i' P_i w_i`` out of the stacked
        disturbance, each of size ``pT``.
        '''
        p = self.p
        out = []
        for i, P in enumerate(self.P_seq(horizon)):
            mat = np.zeros((p * horizon, p * horizon))
            mat[i*p:(i+1)*p, i*p:(i+1)*p] = P
            out.append(mat)
        return out

    def equivalent_omega(self, horizon: int) -> float:
        '''The energy ``sum_k 1 / sigma_min(P_k)`` of the smallest
        enclosing ball.'''
        return float(sum(
            1.0 / sla.eigvalsh(P)[0] for P in self.P_seq(horizon)
        ))

    def contains(self, w_seq) -> bool:
        w_seq = np.asarray(w_seq, dtype=float)
        P_seq = self.P_seq(len(w_seq))
        return all(w @ P @ w <= 1.0 + 1e-12 for w, P in zip(w_seq, P_seq))


type DisturbanceModel = EnergyBall | ZeroInit | AdversarialInit | PointwiseEllipsoid


@dataclass(frozen=True, eq=False)
class RegretWeight:
    '''
    The PD weight ``W`` bounding regret by ``mu delta' W delta``,
    partitioned after the first `n` coordinates.

    :param W: The symmetric PD weight
    :param n: The state dimension
    :param provenance: ``'identity'`` (dynamic regret), ``'benchmark'``
        (competitive ratio) or ``'custom'``
    :param epsilon: The multiple of the identity added to make a
        singular benchmark definite, zero otherwise
    '''
    W: Matrix
    n: int
    provenance: Provenance = 'custom'
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        W = as_matrix(self.W, 'W')
        if W.shape[0] != W.shape[1]:
            raise DimensionMismatchError(f"W must be square, got {W.shape}.")
        if np.max(np.abs(W - W.T), initial=0.0) > SYMMETRY_TOL * max(
            1.0, np.abs(W).max(initial=0.0)
        ):
            raise NotPositiveSemidefiniteError("W is not symmetric.")
        W = symmetrize(W)
        if min_eig(W) <= 0.0:
            raise NotPositiveSemidefiniteError(
                f"W is not positive definite"
                f" (smallest eigenvalue {min_eig(W):.3g})."
            )
        W.setflags(write=False)
        object.__setattr__(self, 'W', W)

    @classmethod
    def identity(cls, dim: int, n: int) -> Self:
        return cls(np.eye(dim), n, 'identity')

    @classmethod
    def benchmark(cls, O: BenchmarkOperator) -> Self:
        '''
        The competitive-ratio weight ``W = O``. A singular `O` becomes
        ``O + eps I`` with ``eps = 1e-8 trace(O) / dim``.
        '''
        dim = O.O.shape[0]
        eps = 1e-8 * np.trace(O.O) / dim
        if eps <= 0.0:
            eps = 1e-8
        if min_eig(O.O) > eps:
            return cls(O.O, O.n, 'benchmark')
        logger.debug(
            f"Benchmark weight is singular (smallest eigenvalue"
            f" {min_eig(O.O):.3g}); adding {eps:.3g} I."
        )
        return cls(O.O + eps * np.eye(dim), O.n, 'benchmark', eps)

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def W1(self) -> Matrix:
        return self.W[:self.n, :self.n]

    @property
    def W2(self) -> Matrix:
        return self.W[self.n:, :self.n]

    @property
    def W3(self) -> Matrix:
        return self.W[self.n:, self.n:]

    @property
    def condition(self) -> float:
        return condition_number(self.W)


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    '''
    Polytopic state and input sets ``{x | H_x x <= 1}`` and
    ``{u | H_u u <= 1}`` imposed at every step.

    Either matrix may have zero rows.

    :raises: :exc:`ValueError` for a zero row, which would make the set
        empty or trivial
    '''
    H_x: Matrix
    H_u: Matrix

    def __post_init__(self) -> None:
        for name in ('H_x', 'H_u'):
            H = np.array(getattr(self, name), dtype=float, ndmin=2)
            if H.size == 0:
                H = H.reshape(0, H.shape[-1])
            if H.size and np.any(np.all(H == 0.0, axis=1)):
                raise ValueError(f"{name} has a zero row.")
            H.setflags(write=False)
            object.__setattr__(self, name, H)

    @classmethod
    def from_bounds(
        cls,
        n: int,
        m: int,
        state_bounds: Sequence[float] | None = None,
        input_bounds: Sequence[float] | None = None,
    ) -> Self:
        '''
        Box sets ``|x_i| <= state_bounds[i]`` and ``|u_i| <= input_bounds[i]``.
        Infinite or missing bounds add no rows.
        '''
        def box(bounds, dim):
            if bounds is None:
                return np.zeros((0, dim))
            bounds = np.asarray(bounds, dtype=float).ravel()
            if bounds.size != dim or np.any(bounds <= 0.0):
                raise ValueError(
                    f"Expected {dim} positive bounds, got {bounds.tolist()}."
                )
            rows = []
            for i, b in enumerate(bounds):
                if np.isinf(b):
                    continue
                row = np.zeros(dim)
                row[i] = 1.0 / b
                rows.extend((row, -row))
            return np.array(rows).reshape(-1, dim)

        return cls(box(state_bounds, n), box(input_bounds, m))

    @property
    def q_x(self) -> int:
        return self.H_x.shape[0]

    @property
    def q_u(self) -> int:
        return self.H_u.shape[0]

    @property
    def empty(self) -> bool:
        return self.q_x + self.q_u == 0

    def Hz(self, horizon: int) -> Matrix:
        '''``blkdiag(I (x) H_x, I (x) H_u)`` over ``horizon + 1`` steps.'''
        eye = np.eye(horizon + 1)
        return sla.block_diag(np.kron(eye, self.H_x), np.kron(eye, self.H_u))

    def check_against(self, sys: LTVSystem) -> None:
        if self.H_x.shape[1] != sys.n or self.H_u.shape[1] != sys.m:
            raise DimensionMismatchError(
                f"Constraint widths {self.H_x.shape[1]}, {self.H_u.shape[1]}"
                f" do not match (n, m) = ({sys.n}, {sys.m})."
            )

    def max_value(self, x_seq, u_seq) -> float:
        '''The largest row value ``H_x x_k`` or ``H_u u_k`` along a run;
        at most 1 means satisfied.'''
        vals = [
            np.asarray(x_seq) @ self.H_x.T,
            np.asarray(u_seq) @ self.H_u.T,
        ]
        return float(max((v.max() for v in vals if v.size), default=-np.inf))


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    '''
    The outcome of a synthesis. `mu`, `phi` and `controller` are set only
    when :attr:`status` is ``'optimal'`` or ``'near_optimal'``.

    :param variant: The program solved
    :param mu: The optimal performance level
    :param lambdas: Multipliers: one for energy balls, one per step for
        pointwise ellipsoids, none otherwise
    :param weight: Provenance of the regret weight, ``None`` for
        baselines
    :param residuals: Achievability and constraint residuals
    :param diagnostics: Variant-specific extras
    '''
    variant: str
    status: SolverStatus
    mu: float | None = None
    lambdas: tuple[float, ...] = ()
    phi: SystemResponse | None = None
    controller: Controller | None = None
    weight: Provenance | None = None
    residuals: dict[str, float] = field(default_factory=dict)
    solve_time: float = 0.0
    iterations: int | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in ('optimal', 'near_optimal')

    @property
    def competitive_ratio(self) -> float | None:
        '''``1 + mu`` when the weight is the benchmark.'''
        if self.weight != 'benchmark' or self.mu is None:
            return None
        return 1.0 + self.mu


def _response_variable(
    program: ConicProgram,
    sys: LTVSystem,
    causal: bool = True
) -> AffineMatrix:
    n, m, p, T = sys.n, sys.m, sys.p, sys.horizon
    pattern = causal_pattern(n, m, p, T) if causal else None
    return program.variable(
        ((n + m) * (T + 1), sys.delta_dim), pattern=pattern, name='Phi'
    )


def _add_achievability(
    program: ConicProgram,
    Phi: AffineMatrix,
    ops: StackedOperators
) -> None:
    program.add_equality(
        ops.achievability_lhs @ Phi, ops.blkE, name='achievability'
    )


def _s_lemma_lmi(
    Phi: AffineMatrix,
    cost: CostSpec,
    O: BenchmarkOperator,
    x0: Vector,
    corner: AffineMatrix,
    body: AffineMatrix,
    cross: AffineMatrix | None = None,
) -> AffineMatrix:
    '''
    The Schur-complement LMI certifying
    ``delta' (Phi' C Phi - O) delta <= corner + ...`` for all
    disturbances, with `corner`, `cross` and `body` holding the multiplier
    and weight terms of the ``(x0, x0)``, ``(w, x0)`` and ``(w, w)`` blocks.
    '''
    n = O.n
    x0c = x0.reshape(-1, 1)
    CPhi = cost.C_sqrt @ Phi
    CPhi0x0 = CPhi[:, :n] @ x0c
    CPhiw = CPhi[:, n:]
    O2x0 = O.O2 @ x0c
    top = corner + float(x0 @ O.O1 @ x0)
    mid = O2x0 if cross is None else cross + O2x0
    mid = AffineMatrix.lift(mid, O2x0.shape)
    size = CPhi.shape[0]
    return bmat([
        [top, mid.T, CPhi0x0.T],
        [mid, body + O.O3, CPhiw.T],
        [CPhi0x0, CPhiw, np.eye(size)],
    ])


def _sum(exprs: Sequence[AffineMatrix]) -> AffineMatrix:
    total = exprs[0]
    for expr in exprs[1:]:
        total = total + expr
    return total


def add_constraint_rows(
    program: ConicProgram,
    phi: AffineMatrix,
    x0: Vector,
    P: Matrix | Sequence[Matrix],
    spec: ConstraintSpec,
) -> ConicProgram:
    '''
    Robustify ``H_z [x; u] <= 1`` over pointwise ellipsoids by the dual
    norm of each disturbance block: for every row ``h`` of ``H_z``,
    ``h Phi_0 x0 + sum_j ||h [Phi_w]_j P_j^{-1/2}|| <= 1``.

    Each norm gets an auxiliary bound ``t`` through a second-order cone.
    Blocks that are structurally zero are skipped.

    :param program: The program to extend
    :param phi: The response variable ``[Phi_x; Phi_u]``
    :param x0: The initial state
    :param P: One ellipsoid matrix or one per step
    :param spec: The constraint sets

    :returns: `program`
    '''
    if spec.empty:
        return program
    x0 = _vector(x0)
    n = x0.size
    p = np.asarray(P, dtype=float).shape[-1]
    T = (phi.shape[1] - n) // p
    model = PointwiseEllipsoid(P, x0)
    roots = [inv_sqrt(Pj) for Pj in model.P_seq(T)]
    HPhi = spec.Hz(T) @ phi
    x0c = np.asarray(x0, dtype=float).reshape(-1, 1)

    for i in range(HPhi.shape[0]):
        row = HPhi[i:i+1, :]
        total = row[:, :n] @ x0c
        for j in range(T):
            block = row[:, n + p*j:n + p*(j+1)]
            if block.coef.count_nonzero() == 0 and not np.any(block.const):
                continue
            t = program.scalar(name=f"t_{i}_{j}")
            program.add_soc(t, block @ roots[j], name=f"tighten_{i}_{j}")
            total = total + t
        program.add_nonnegative(1.0 - total, name=f"constraint_{i}")
    logger.debug(f"Added {HPhi.shape[0]} tightened constraint rows.")
    return program


def add_ball_constraint_rows(
    program: ConicProgram,
    phi: AffineMatrix,
    x0: Vector,
    omega: float,
    spec: ConstraintSpec,
) -> ConicProgram:
    '''
    Robustify ``H_z [x; u] <= 1`` over the energy ball ``||w||^2 <= omega``:
    ``h Phi_0 x0 + sqrt(omega) ||h Phi_w|| <= 1`` for every row ``h``.
    '''
    if spec.empty:
        return program
    n = x0.size
    T = (phi.shape[0] // (spec.H_x.shape[1] + spec.H_u.shape[1])) - 1
    HPhi = spec.Hz(T) @ phi
    x0c = np.asarray(x0, dtype=float).reshape(-1, 1)
    for i in range(HPhi.shape[0]):
        row = HPhi[i:i+1, :]
        t = program.scalar(name=f"t_{i}")
        program.add_soc(t, np.sqrt(omega) * row[:, n:], name=f"tighten_{i}")
        program.add_nonnegative(
            1.0 - row[:, :n] @ x0c - t, name=f"constraint_{i}"
        )
    return program


type Tightening = PointwiseEllipsoid | EnergyBall


def _tighten(
    program: ConicProgram,
    Phi: AffineMatrix,
    sys: LTVSystem,
    constraints: ConstraintSpec | None,
    tightening: Tightening | None,
) -> None:
    if constraints is None:
        return
    constraints.check_against(sys)
    match tightening:
        case PointwiseEllipsoid():
            add_constraint_rows(
                program, Phi, tightening.x0, tightening.P_seq(sys.horizon),
                constraints
            )
        case EnergyBall():
            add_ball_constraint_rows(
                program, Phi, tightening.x0, tightening.omega, constraints
            )
        case _:
            raise ValueError(
                "Constraints need a pointwise ellipsoid or an energy ball"
                " to be tightened against."
            )


def _finish(
    variant: str,
    program: ConicProgram,
    settings: SolverSettings | None,
    sys: LTVSystem,
    ops: StackedOperators,
    Phi: AffineMatrix,
    level: AffineMatrix,
    lambdas: Sequence[AffineMatrix] = (),
    weight: Provenance | None = None,
    transform=None,
    diagnostics: dict | None = None,
) -> SynthesisResult:
    '''Solve, read off the response and recover the controller.'''
    diagnostics = dict(diagnostics or {})
    report: SolveReport = solve(program, settings)
    diagnostics.update(
        n_variables=program.n_variables,
        lmi_sizes=list(program.lmi_sizes),
        backend=report.backend,
        primal_residual=report.primal_residual,
        dual_residual=report.dual_residual,
    )
    common = dict(
        variant=variant,
        weight=weight,
        solve_time=report.solve_time,
        iterations=report.iterations,
        diagnostics=diagnostics,
    )
    if not report.ok:
        logger.warning(f"{variant}: solver status {report.status!r}")
        return SynthesisResult(status=report.status, **common)

    x = report.x
    n_x = sys.n * (sys.horizon + 1)
    Phi_val = Phi.value(x)
    phi = SystemResponse.from_dense(
        Phi_val[:n_x], Phi_val[n_x:], sys.n, sys.p
    )
    try:
        controller = recover_controller(phi)
    except SingularResponseError as e:
        logger.warning(f"{variant}: {e}")
        return SynthesisResult(status='numerical_failure', **common)

    raw = level.scalar_value(x)
    mu = transform(raw) if transform is not None else raw
    constraint_res = max(
        (r.residual for r in report.residuals
            if r.name.startswith(('constraint', 'tighten'))),
        default=0.0
    )
    residuals = dict(
        achievability=achievability_residual(phi, ops),
        constraints=constraint_res,
        program=report.primal_residual,
    )
    logger.info(f"{variant}: status {report.status!r}, level {mu:.6g}")
    return SynthesisResult(
        status=report.status,
        mu=mu,
        lambdas=tuple(lam.scalar_value(x) for lam in lambdas),
        phi=phi,
        controller=controller,
        residuals=residuals,
        **common,
    )


def _check(sys: LTVSystem, cost: CostSpec, O=None, W=None) -> None:
    cost.check_against(sys)
    if O is not None and O.O.shape[0] != sys.delta_dim:
        raise DimensionMismatchError(
            f"Benchmark of size {O.O.shape[0]} for a system with"
            f" {sys.delta_dim} disturbance coordinates."
        )
    if W is not None and W.dim != sys.delta_dim:
        raise DimensionMismatchError(
            f"Weight of size {W.dim} for a system with"
            f" {sys.delta_dim} disturbance coordinates."
        )


def synth_energy_ball(
    sys: LTVSystem,
    cost: CostSpec,
    O: BenchmarkOperator,
    W: RegretWeight,
    x0: Vector,
    omega: float,
    constraints: ConstraintSpec | None = None,
    tightening: Tightening | None = None,
    settings: SolverSettings | None = None,
    ops: StackedOperators | None = None,
) -> SynthesisResult:
    '''
    Minimise the generalised regret level ``mu`` over energy-bounded
    disturbances ``||w||^2 <= omega`` from the initial state `x0`.

    A single multiplier ``lambda`` certifies the bound, and the level is
    tight because strong duality holds for one quadratic constraint.

    :param sys: The system
    :param cost: The stage costs
    :param O: The benchmark operator (possibly constrained)
    :param W: The regret weight
    :param x0: The initial state
    :param omega: The energy bound
    :param constraints: State and input sets to satisfy robustly
    :param tightening: The disturbance set constraints are robustified
        against, defaults to the energy ball itself
    :param settings: Backend options
    :param ops: Precomputed stacked operators

    :rtype: :class:`SynthesisResult`
    '''
    _check(sys, cost, O, W)
    model = EnergyBall(omega, _vector(x0, sys.n))
    ops = ops or build_stacked(sys)
    program = ConicProgram('energy_ball')
    Phi = _response_variable(program, sys)
    _add_achievability(program, Phi, ops)

    mu = program.scalar('mu')
    lam = program.scalar('lambda')
    program.add_nonnegative(lam, name='lambda')
    x0 = model.x0
    x0c = x0.reshape(-1, 1)
    corner = mu.times(x0c.T @ W.W1 @ x0c) - lam * model.omega
    cross = mu.times(W.W2 @ x0c)
    body = lam.times(np.eye(W.W3.shape[0])) + mu.times(W.W3)
    program.add_lmi(
        _s_lemma_lmi(Phi, cost, O, x0, corner, body, cross), name='regret'
    )
    _tighten(program, Phi, sys, constraints, tightening or model)
    program.minimize(mu)
    return _finish(
        'energy_ball', program, settings, sys, ops, Phi, mu, [lam],
        weight=W.provenance,
        diagnostics=dict(omega=model.omega, weight_epsilon=W.epsilon),
    )


def synth_dynamic_regret_reference(
    sys: LTVSystem,
    cost: CostSpec,
    O: BenchmarkOperator,
    x0: Vector,
    omega: float,
    settings: SolverSettings | None = None,
    ops: StackedOperators | None = None,
) -> SynthesisResult:
    '''
    The dynamic-regret program in its own variables
    ``lambda_hat = mu + lambda`` and ``mu_hat = mu (x0' x0 + omega)``.
    Reports ``mu = mu_hat / (x0' x0 + omega)`` and keeps ``mu_hat`` in the
    diagnostics; the level matches :func:`synth_energy_ball` with
    ``W = I``.
    '''
    _check(sys, cost, O)
    model = EnergyBall(omega, _vector(x0, sys.n))
    x0 = model.x0
    scale = float(x0 @ x0) + model.omega
    if scale <= 0.0:
        raise InvalidParameterError(
            "The reference program needs a nonzero initial state"
            " or energy bound."
        )
    ops = ops or build_stacked(sys)
    program = ConicProgram('dynamic_regret_reference')
    Phi = _response_variable(program, sys)
    _add_achievability(program, Phi, ops)

    mu_hat = program.scalar('mu_hat')
    lam_hat = program.scalar('lambda_hat')
    program.add_nonnegative(lam_hat - (1.0 / scale) * mu_hat, name='lambda')
    corner = mu_hat - lam_hat * model.omega
    body = lam_hat.times(np.eye(sys.p * sys.horizon))
    program.add_lmi(
        _s_lemma_lmi(Phi, cost, O, x0, corner, body), name='regret'
    )
    program.minimize(mu_hat)
    result = _finish(
        'dynamic_regret_reference', program, settings, sys, ops, Phi,
        mu_hat, [lam_hat], weight='identity',
        transform=lambda v: v / scale,
        diagnostics=dict(omega=model.omega, scale=scale),
    )
    if result.mu is not None:
        result.diagnostics['mu_hat'] = result.mu * scale
    return result


def _gain_lmi(
    program: ConicProgram,
    CPhi: AffineMatrix,
    S: Matrix,
    O_part: Matrix,
    mu: AffineMatrix,
) -> None:
    '''``[mu I + S O S, S Phi' C^{1/2}; ., I] >= 0``.'''
    dim = S.shape[0]
    lower = CPhi @ S
    program.add_lmi(bmat([
        [mu.times(np.eye(dim)) + symmetrize(S @ O_part @ S), lower.T],
        [lower, np.eye(CPhi.shape[0])],
    ]), name='gain')


def synth_zero_init(
    sys: LTVSystem,
    cost: CostSpec,
    O: BenchmarkOperator,
    W: RegretWeight,
    constraints: ConstraintSpec | None = None,
    tightening: Tightening | None = None,
    settings: SolverSettings | None = None,
    ops: StackedOperators | None = None,
) -> SynthesisResult:
    '''
    Minimise the generalised regret gain from disturbances with the
    initial state at the origin. The optimal level is the largest
    eigenvalue of ``W3^{-1/2} (Phi_w' C Phi_w - O3) W3^{-1/2}``.

    :raises: :exc:`errors.ConditioningError` when ``W3`` has condition
        above :obj:`constants.CONDITION_LIMIT`
    '''
    _check(sys, cost, O, W)
    S = inv_sqrt(W.W3)
    ops = ops or build_stacked(sys)
    program = ConicProgram('zero_init')
    Phi = _response_variable(program, sys)
    _add_achievability(program, Phi, ops)
    mu = program.scalar('mu')
    _gain_lmi(program, (cost.C_sqrt @ Phi)[:, sys.n:], S, O.O3, mu)
    _tighten(program, Phi, sys, constraints, tightening)
    program.minimize(mu)
    return _finish(
        'zero_init', program, settings, sys, ops, Phi, mu,
        weight=W.provenance, diagnostics=dict(weight_epsilon=W.epsilon),
    )


def synth_adversarial_init(
    sys: LTVSystem,
    cost: CostSpec,
    O: BenchmarkOperator,
    W: RegretWeight,
    constraints: ConstraintSpec | None = None,
    tightening: Tightening | None = None,
    settings: SolverSettings | None = None,
    ops: StackedOperators | None = None,
) -> SynthesisResult:
    '''
    As :func:`synth_zero_init`, with the initial state chosen by the
    adversary: the full weight, benchmark and response enter the LMI.
    '''
    _check(sys, cost, O, W)
    S = inv_sqrt(W.W)
    ops = ops or build_stacked(sys)
    program = ConicProgram('adversarial_init')
    Phi = _response_variable(program, sys)
    _add_achievability(program, Phi, ops)
    mu = program.scalar('mu')
    _gain_lmi(program, cost.C_sqrt @ Phi, S, O.O, mu)
    _tighten(program, Phi, sys, constraints, tightening)
    program.minimize(mu)
    return _finish(
        'adversarial_init', program, settings, sys, ops, Phi, mu,
        weight=W.provenance, diagnostics=dict(weight_epsilon=W.epsilon),
    )


def synth_pointwise(
    sys: LTVSystem,
    cost: CostSpec,
    O: BenchmarkOperator,
    W: RegretWeight,
    x0: Vector,
    P: Matrix | Sequence[Matrix],
    constraints: ConstraintSpec | None = None,
    settings: SolverSettings | None = None,
    ops: StackedOperators | None = None,
) -> SynthesisResult:
    '''
    Minimise an upper bound on the generalised regret level over
    disturbances with ``w_k' P_k w_k <= 1`` at every step, using one
    multiplier per step.

    The returned level bounds the true worst case from above and never
    exceeds the energy-ball level at ``omega = sum_k 1 / sigma_min(P_k)``.

    :param P: One ellipsoid matrix or one per step
    :type P: :class:`Matrix` | :class:`Sequence[Matrix]`

    :rtype: :class:`SynthesisResult`
    '''
    _check(sys, cost, O, W)
    model = PointwiseEllipsoid(P, _vector(x0, sys.n))
    if model.p != sys.p:
        raise DimensionMismatchError(
            f"Ellipsoid of size {model.p} for disturbances of size {sys.p}."
        )
    T = sys.horizon
    ops = ops or build_stacked(sys)
    program = ConicProgram('pointwise')
    Phi = _response_variable(program, sys)
    _add_achievability(program, Phi, ops)

    mu = program.scalar('mu')
    lams = [program.scalar(f"lambda_{i}") for i in range(T)]
    for i, lam in enumerate(lams):
        program.add_nonnegative(lam, name=f"lambda_{i}")
    x0 = model.x0
    x0c = x0.reshape(-1, 1)
    corner = mu.times(x0c.T @ W.W1 @ x0c) - _sum(lams)
    cross = mu.times(W.W2 @ x0c)
    body = _sum([
        lam.times(Pi) for lam, Pi in zip(lams, model.embedded(T))
    ]) + mu.times(W.W3)
    program.add_lmi(
        _s_lemma_lmi(Phi, cost, O, x0, corner, body, cross), name='regret'
    )
    _tighten(program, Phi, sys, constraints, model)
    program.minimize(mu)
    return _finish(
        'pointwise', program, settings, sys, ops, Phi, mu, lams,
        weight=W.provenance,
        diagnostics=dict(
            omega_equivalent=model.equivalent_omega(T),
            weight_epsilon=W.epsilon,
        ),
    )


def synth_h2(
    sys: LTVSystem,
    cost: CostSpec,
    constraints: ConstraintSpec | None = None,
    tightening: Tightening | None = None,
    settings: SolverSettings | None = None,
    ops: StackedOperators | None = None,
) -> SynthesisResult:
    '''
    Minimise ``||C^{1/2} Phi||_F^2`` through its epigraph
    ``||vec(C^{1/2} Phi)|| <= s``. The level is ``s^2``.
    '''
    _check(sys, cost)
    ops = ops or build_stacked(sys)
    program = ConicProgram('h2')
    Phi = _response_variable(program, sys)
    _add_achievability(program, Phi, ops)
    s = program.scalar('s')
    program.add_soc(s, cost.C_sqrt @ Phi, name='frobenius')
    _tighten(program, Phi, sys, constraints, tightening)
    program.minimize(s)
    result = _finish(
        'h2', program, settings, sys, ops, Phi, s,
        transform=lambda v: v * v,
    )
    if result.mu is not None:
        result.diagnostics['h2_norm'] = float(np.sqrt(result.mu))
    return result


def synth_hinf(
    sys: LTVSystem,
    cost: CostSpec,
    constraints: ConstraintSpec | None = None,
    tightening: Tightening | None = None,
    settings: SolverSettings | None = None,
    ops: StackedOperators | None = None,
) -> SynthesisResult:
    '''
    Minimise ``gamma^2 = ||C^{1/2} Phi_w||^2`` in the operator norm: the
    zero-initial-state program with no benchmark and ``W = I``.
    '''
    _check(sys, cost)
    ops = ops or build_stacked(sys)
    program = ConicProgram('hinf')
    Phi = _response_variable(program, sys)
    _add_achievability(program, Phi, ops)
    mu = program.scalar('gamma_sq')
    dim = sys.p * sys.horizon
    _gain_lmi(
        program, (cost.C_sqrt @ Phi)[:, sys.n:], np.eye(dim),
        np.zeros((dim, dim)), mu
    )
    _tighten(program, Phi, sys, constraints, tightening)
    program.minimize(mu)
    result = _finish('hinf', program, settings, sys, ops, Phi, mu)
    if result.mu is not None:
        result.diagnostics['gamma'] = float(np.sqrt(max(result.mu, 0.0)))
    return result


def constrained_noncausal_benchmark(
    sys: LTVSystem,
    cost: CostSpec,
    spec: ConstraintSpec,
    P: Matrix | Sequence[Matrix],
    x0: Vector,
    objective: Literal['frobenius', 'operator'] = 'frobenius',
    settings: SolverSettings | None = None,
    ops: StackedOperators | None = None,
) -> BenchmarkOperator:
    '''
    The cost ``Phi' C Phi`` of the best full-block response that meets the
    tightened constraints for every pointwise-bounded disturbance.

    The matrix cost is scalarised by its Frobenius norm by default or by
    its operator norm; the returned benchmark depends on that choice.

    :raises: :exc:`errors.InfeasibleBenchmarkError` if no full-block
        response satisfies the constraints
    '''
    _check(sys, cost)
    spec.check_against(sys)
    model = PointwiseEllipsoid(P, _vector(x0, sys.n))
    ops = ops or build_stacked(sys)
    program = ConicProgram(f"constrained_benchmark_{objective}")
    Phi = _response_variable(program, sys, causal=False)
    _add_achievability(program, Phi, ops)
    CPhi = cost.C_sqrt @ Phi
    t = program.scalar('t')
    match objective:
        case 'frobenius':
            program.add_soc(t, CPhi, name='frobenius')
        case 'operator':
            dim = sys.delta_dim
            program.add_lmi(bmat([
                [t.times(np.eye(dim)), CPhi.T],
                [CPhi, np.eye(CPhi.shape[0])],
            ]), name='operator')
        case _:
            raise ValueError(
                f"Unknown objective {objective!r}, expected "
                + join_options(('frobenius', 'operator'))
            )
    add_constraint_rows(
        program, Phi, model.x0, model.P_seq(sys.horizon), spec
    )
    program.minimize(t)
    report = solve(program, settings)
    if not report.ok:
        raise InfeasibleBenchmarkError(
            f"Constrained benchmark has status {report.status!r}.",
            report.status
        )
    Phi_val = Phi.value(report.x)
    CPhi_val = cost.C_sqrt @ Phi_val
    return BenchmarkOperator(O=symmetrize(CPhi_val.T @ CPhi_val), n=sys.n)


@dataclass(eq=False)
class Instance:
    '''
    A complete synthesis problem: dynamics, costs, the disturbance model
    with its initial state, optional constraints, the weight for
    custom-weight synthesis and solver settings. Stacked operators and the
    benchmark are computed once.

    :param model: The declared disturbance model
    :param omega: An explicit energy bound for energy-ball variants;
        pointwise models otherwise supply their equivalent bound
    :param constrained_benchmark: Compare against the constrained
        non-causal benchmark when constraints and a pointwise model are
        present
    '''
    sys: LTVSystem
    cost: CostSpec
    model: DisturbanceModel
    constraints: ConstraintSpec | None = None
    weight: WeightChoice = 'identity'
    omega: float | None = None
    constrained_benchmark: bool = False
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self) -> None:
        self.cost.check_against(self.sys)
        if self.constraints is not None:
            self.constraints.check_against(self.sys)
        if isinstance(self.model, PointwiseEllipsoid):
            self.model.P_seq(self.sys.horizon)
            if self.model.p != self.sys.p:
                raise DimensionMismatchError(
                    f"Ellipsoid of size {self.model.p} for disturbances"
                    f" of size {self.sys.p}."
                )
        if not isinstance(self.weight, str):
            W = self.regret_weight(self.weight)
            if W.dim != self.sys.delta_dim:
                raise DimensionMismatchError(
                    f"Weight of size {W.dim} for a system with"
                    f" {self.sys.delta_dim} disturbance coordinates."
                )

    @property
    def x0(self) -> Vector:
        match self.model:
            case EnergyBall(x0=x0) | PointwiseEllipsoid(x0=x0):
                return _vector(x0, self.sys.n)
        return np.zeros(self.sys.n)

    @property
    def pointwise(self) -> PointwiseEllipsoid | None:
        if isinstance(self.model, PointwiseEllipsoid):
            return self.model
        return None

    @property
    def energy_bound(self) -> float:
        '''The energy bound used by energy-ball variants.'''
        if self.omega is not None:
            return float(self.omega)
        match self.model:
            case EnergyBall(omega=omega):
                return omega
            case PointwiseEllipsoid():
                return self.model.equivalent_omega(self.sys.horizon)
        raise ValueError(
            "Energy-ball synthesis needs 'omega' or a pointwise ellipsoid."
        )

    @property
    def tightening(self) -> Tightening | None:
        if self.pointwise is not None:
            return self.pointwise
        if isinstance(self.model, EnergyBall):
            return self.model
        return None

    @cached_property
    def ops(self) -> StackedOperators:
        return build_stacked(self.sys)

    @cached_property
    def unconstrained_benchmark(self) -> BenchmarkOperator:
        return noncausal_cost_operator(self.sys, self.cost, self.ops)

    @cached_property
    def benchmark(self) -> BenchmarkOperator:
        if (
            self.constrained_benchmark
            and self.constraints is not None
            and self.pointwise is not None
        ):
            return constrained_noncausal_benchmark(
                self.sys, self.cost, self.constraints, self.pointwise.P,
                self.x0, settings=self.settings, ops=self.ops
            )
        return self.unconstrained_benchmark

    def regret_weight(self, choice: WeightChoice) -> RegretWeight:
        dim, n = self.sys.delta_dim, self.sys.n
        if isinstance(choice, str):
            match choice:
                case 'identity':
                    return RegretWeight.identity(dim, n)
                case 'benchmark':
                    return RegretWeight.benchmark(self.benchmark)
                case _:
                    raise ValueError(
                        f"Unknown weight {choice!r}, expected "
                        + join_options(('identity', 'benchmark'))
                        + " or a matrix"
                    )
        return RegretWeight(choice, n, 'custom')


def synthesize(
    instance: Instance,
    variant: VariantName,
    constraints: bool = True,
) -> SynthesisResult:
    '''
    Synthesise the controller named by `variant` for `instance`.

    ``'dr-*'`` variants use ``W = I``, ``'cr-*'`` variants use the
    benchmark as weight, ``'*-energy'`` variants bound the disturbance
    energy and ``'*-pwb'`` variants bound it pointwise. ``'custom-weight'``
    uses the instance's own weight and disturbance model.

    :param instance: The problem
    :type instance: :class:`Instance`

    :param variant: One of :obj:`constants.VARIANTS`
    :type variant: :class:`str`

    :param constraints: Whether to impose the instance's constraints
    :type constraints: :class:`bool`

    :raises: :exc:`ValueError` when the variant needs data the instance
        lacks
    '''
    if variant not in VARIANTS:
        raise ValueError(
            f"Unknown variant {variant!r}, expected " + join_options(VARIANTS)
        )
    sys, cost, ops = instance.sys, instance.cost, instance.ops
    spec = instance.constraints if constraints else None
    common = dict(settings=instance.settings, ops=ops)
    logger.info(f"Synthesising {variant!r} (constraints {spec is not None})")

    def weight_for(prefix: str) -> RegretWeight:
        return instance.regret_weight(
            'identity' if prefix == 'dr' else 'benchmark'
        )

    def pointwise_or_fail() -> PointwiseEllipsoid:
        if instance.pointwise is None:
            raise ValueError(
                f"Variant {variant!r} needs a pointwise disturbance model."
            )
        return instance.pointwise

    match variant.split('-', 1):
        case ['h2']:
            result = synth_h2(sys, cost, spec, instance.tightening, **common)
        case ['hinf']:
            result = synth_hinf(sys, cost, spec, instance.tightening, **common)
        case [prefix, 'energy']:
            result = synth_energy_ball(
                sys, cost, instance.benchmark, weight_for(prefix),
                instance.x0, instance.energy_bound, spec,
                instance.tightening, **common
            )
        case [prefix, 'pwb']:
            model = pointwise_or_fail()
            result = synth_pointwise(
                sys, cost, instance.benchmark, weight_for(prefix),
                instance.x0, model.P, spec, **common
            )
        case ['custom', 'weight']:
            result = _synth_custom(instance, spec, common)
    return _relabel(result, variant)


def _synth_custom(
    instance: Instance,
    spec: ConstraintSpec | None,
    common: dict,
) -> SynthesisResult:
    sys, cost, O = instance.sys, instance.cost, instance.benchmark
    W = instance.regret_weight(instance.weight)
    match instance.model:
        case EnergyBall(x0=x0):
            return synth_energy_ball(
                sys, cost, O, W, x0, instance.energy_bound, spec,
                instance.tightening, **common
            )
        case PointwiseEllipsoid(P=P, x0=x0):
            return synth_pointwise(sys, cost, O, W, x0, P, spec, **common)
        case ZeroInit():
            return synth_zero_init(
                sys, cost, O, W, spec, instance.tightening, **common
            )
        case AdversarialInit():
            return synth_adversarial_init(
                sys, cost, O, W, spec, instance.tightening, **common
            )


def _relabel(result: SynthesisResult, variant: str) -> SynthesisResult:
    diagnostics = dict(result.diagnostics, program=result.variant)
    return SynthesisResult(
        variant=variant,
        status=result.status,
        mu=result.mu,
        lambdas=result.lambdas,
        phi=result.phi,
        controller=result.controller,
        weight=result.weight,
        residuals=result.residuals,
        solve_time=result.solve_time,
        iterations=result.iterations,
        diagnostics=diagnostics,
    )
