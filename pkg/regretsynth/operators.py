'''
Stacked operators of the finite-horizon problem and the optimal
non-causal benchmark.

States, inputs and disturbances are stacked over the horizon::

    x = [x_0; ...; x_T]    u = [u_0; ...; u_T]    delta = [x_0; w_0; ...; w_{T-1}]

so that ``x = F u + G delta``.
'''

__all__ = (
    'BenchmarkOperator',
    'CostSpec',
    'LTVSystem',
    'StackedOperators',
    'build_stacked',
    'evaluate_cost',
    'noncausal_control',
    'noncausal_cost_operator',
    'rollout_open_loop',
    'split_delta',
    'stack_delta',
)


import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .constants import SYMMETRY_TOL, TOL_PD, TOL_PSD
from .errors import (
    DimensionMismatchError,
    NotPositiveSemidefiniteError,
    NumericError,
    RankDeficientError,
)
from .utils import as_matrix, min_eig, psd_sqrt, symmetrize
from ._types import Delta, DisturbanceSeq, InputSeq, Matrix, StateSeq

from collections.abc import Sequence
from typing import Self


logger = logging.getLogger(__name__)


def _freeze(mats: Sequence) -> tuple[Matrix, ...]:
    frozen = []
    for mat in mats:
        mat = as_matrix(mat).copy()
        mat.setflags(write=False)
        frozen.append(mat)
    return tuple(frozen)


@dataclass(frozen=True, eq=False)
class LTVSystem:
    '''
    Linear time-varying dynamics ``x_{k+1} = A_k x_k + B_k u_k + E_k w_k``
    over a horizon of `T` steps.

    ``A_T`` and ``B_T`` are accepted so every sequence is indexed like the
    stacked state, but the dynamics never use them.

    :param A_seq: ``T + 1`` square matrices of size ``n x n``
    :type A_seq: :class:`Sequence[Matrix]`

    :param B_seq: ``T + 1`` matrices of size ``n x m``
    :type B_seq: :class:`Sequence[Matrix]`

    :param E_seq: ``T`` matrices of size ``n x p``, each with full row rank
    :type E_seq: :class:`Sequence[Matrix]`

    :raises: :exc:`errors.DimensionMismatchError` for inconsistent
        lengths or shapes
    :raises: :exc:`errors.RankDeficientError` when some ``E_k`` has rank
        below ``n``
    '''
    A_seq: tuple[Matrix, ...]
    B_seq: tuple[Matrix, ...]
    E_seq: tuple[Matrix, ...]

    def __post_init__(self) -> None:
        A_seq, B_seq, E_seq = (
            _freeze(s) for s in (self.A_seq, self.B_seq, self.E_seq)
        )
        T = len(E_seq)
        if T < 1:
            raise DimensionMismatchError("The horizon must be at least 1.")
        if len(A_seq) != T + 1 or len(B_seq) != T + 1:
            raise DimensionMismatchError(
                f"Expected {T + 1} A and B matrices for horizon {T},"
                f" got {len(A_seq)} and {len(B_seq)}."
            )

        n = A_seq[0].shape[0]
        m = B_seq[0].shape[1]
        p = E_seq[0].shape[1]
        for name, seq, shape in (
            ('A', A_seq, (n, n)),
            ('B', B_seq, (n, m)),
            ('E', E_seq, (n, p)),
        ):
            for k, mat in enumerate(seq):
                if mat.shape != shape:
                    raise DimensionMismatchError(
                        f"{name}_{k} has shape {mat.shape}, expected {shape}."
                    )

        for k, E in enumerate(E_seq):
            if np.linalg.matrix_rank(E) < n:
                raise RankDeficientError(
                    f"E_{k} must have full row rank {n}.", index=k
                )

        object.__setattr__(self, 'A_seq', A_seq)
        object.__setattr__(self, 'B_seq', B_seq)
        object.__setattr__(self, 'E_seq', E_seq)

    @classmethod
    def time_invariant(
        cls,
        A: Matrix,
        B: Matrix,
        E: Matrix,
        horizon: int
    ) -> Self:
        '''Repeat constant system matrices over `horizon` steps.'''
        return cls(
            A_seq=[A] * (horizon + 1),
            B_seq=[B] * (horizon + 1),
            E_seq=[E] * horizon,
        )

    @property
    def horizon(self) -> int:
        return len(self.E_seq)

    @property
    def n(self) -> int:
        return self.A_seq[0].shape[0]

    @property
    def m(self) -> int:
        return self.B_seq[0].shape[1]

    @property
    def p(self) -> int:
        return self.E_seq[0].shape[1]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.n, self.m, self.p)

    @property
    def delta_dim(self) -> int:
        '''The length ``n + pT`` of the stacked ``[x0; w]``.'''
        return self.n + self.p * self.horizon


@dataclass(frozen=True, eq=False)
class CostSpec:
    '''
    Time-varying quadratic stage costs ``x_k' Q_k x_k + u_k' R_k u_k``.

    :param Q_seq: ``T + 1`` symmetric PSD state weights
    :param R_seq: ``T + 1`` symmetric PD input weights
    :param tol_psd: How far below zero eigenvalues of ``Q_k`` may lie
    :param tol_pd: The smallest eigenvalue accepted for ``R_k``

    :raises: :exc:`errors.NotPositiveSemidefiniteError` naming the
        offending time index
    '''
    Q_seq: tuple[Matrix, ...]
    R_seq: tuple[Matrix, ...]
    tol_psd: float = TOL_PSD
    tol_pd: float = TOL_PD

    def __post_init__(self) -> None:
        Q_seq, R_seq = _freeze(self.Q_seq), _freeze(self.R_seq)
        if len(Q_seq) != len(R_seq):
            raise DimensionMismatchError(
                f"Got {len(Q_seq)} Q matrices but {len(R_seq)} R matrices."
            )

        for name, seq, tol, kind in (
            ('Q', Q_seq, -self.tol_psd, 'positive semidefinite'),
            ('R', R_seq, self.tol_pd, 'positive definite'),
        ):
            shape = seq[0].shape
            for k, mat in enumerate(seq):
                if mat.shape != shape or shape[0] != shape[1]:
                    raise DimensionMismatchError(
                        f"{name}_{k} has shape {mat.shape}, expected {shape}."
                    )
                if np.max(np.abs(mat - mat.T), initial=0.0) > SYMMETRY_TOL:
                    raise NotPositiveSemidefiniteError(
                        f"{name}_{k} is not symmetric.", index=k
                    )
                if min_eig(mat) < tol:
                    raise NotPositiveSemidefiniteError(
                        f"{name}_{k} is not {kind}"
                        f" (smallest eigenvalue {min_eig(mat):.3g}).",
                        index=k
                    )

        object.__setattr__(self, 'Q_seq', Q_seq)
        object.__setattr__(self, 'R_seq', R_seq)

    @classmethod
    def time_invariant(cls, Q: Matrix, R: Matrix, horizon: int) -> Self:
        return cls(Q_seq=[Q] * (horizon + 1), R_seq=[R] * (horizon + 1))

    @property
    def horizon(self) -> int:
        return len(self.Q_seq) - 1

    @cached_property
    def Q_blk(self) -> Matrix:
        return sla.block_diag(*self.Q_seq)

    @cached_property
    def R_blk(self) -> Matrix:
        return sla.block_diag(*self.R_seq)

    @cached_property
    def C(self) -> Matrix:
        '''``blkdiag(Q_blk, R_blk)``, the cost on the stacked ``[x; u]``.'''
        return sla.block_diag(self.Q_blk, self.R_blk)

    @cached_property
    def C_sqrt(self) -> Matrix:
        '''The symmetric square root of :attr:`C`, built blockwise.'''
        blocks = [
            psd_sqrt(mat, self.tol_psd) for mat in self.Q_seq + self.R_seq
        ]
        return sla.block_diag(*blocks)

    def check_against(self, sys: LTVSystem) -> None:
        '''Raise if this cost does not fit the dimensions of `sys`.'''
        if (
            self.horizon != sys.horizon
            or self.Q_seq[0].shape[0] != sys.n
            or self.R_seq[0].shape[0] != sys.m
        ):
            raise DimensionMismatchError(
                f"Cost with horizon {self.horizon} and weights"
                f" {self.Q_seq[0].shape}, {self.R_seq[0].shape} does not"
                f" fit a system with horizon {sys.horizon} and"
                f" (n, m) = ({sys.n}, {sys.m})."
            )


@dataclass(frozen=True, eq=False)
class StackedOperators:
    '''
    The block operators of a system over its full horizon.

    :param F: Strictly causal input-to-state map
    :param G: Map from ``delta = [x0; w]`` to states
    :param blkA: ``blkdiag(A_0, ..., A_T)``
    :param blkB: ``blkdiag(B_0, ..., B_T)``
    :param blkE: ``blkdiag(I, E_0, ..., E_{T-1})``
    :param Z: The block downshift operator
    '''
    F: Matrix
    G: Matrix
    blkA: Matrix
    blkB: Matrix
    blkE: Matrix
    Z: Matrix

    @property
    def achievability_lhs(self) -> Matrix:
        '''The matrix ``[I - Z blkA, -Z blkB]``.'''
        nx = self.Z.shape[0]
        return np.hstack((np.eye(nx) - self.Z @ self.blkA, -self.Z @ self.blkB))


@dataclass(frozen=True, eq=False)
class BenchmarkOperator:
    '''
    The cost of the optimal non-causal controller as a quadratic form
    ``delta' O delta``, partitioned after the first `n` coordinates.

    :param O: The symmetric PSD benchmark matrix of size ``n + pT``
    :param n: The state dimension, where the partition splits
    '''
    O: Matrix
    n: int

    def __post_init__(self) -> None:
        O = symmetrize(as_matrix(self.O))
        O.setflags(write=False)
        object.__setattr__(self, 'O', O)

    @property
    def O1(self) -> Matrix:
        return self.O[:self.n, :self.n]

    @property
    def O2(self) -> Matrix:
        return self.O[self.n:, :self.n]

    @property
    def O3(self) -> Matrix:
        return self.O[self.n:, self.n:]

    def cost(self, delta: Delta) -> float:
        '''The benchmark cost ``delta' O delta``.'''
        delta = np.asarray(delta, dtype=float)
        return float(delta @ self.O @ delta)


def _transition_blocks(sys: LTVSystem) -> Matrix:
    '''
    ``(I - Z blkA)^{-1}`` by forward block substitution.
    Block ``(k, j)`` is ``A_{k-1} ... A_j`` for ``j <= k``.
    '''
    n, T = sys.n, sys.horizon
    L = np.zeros((n * (T + 1), n * (T + 1)))
    for j in range(T + 1):
        block = np.eye(n)
        L[j*n:(j+1)*n, j*n:(j+1)*n] = block
        for k in range(j, T):
            block = sys.A_seq[k] @ block
            L[(k+1)*n:(k+2)*n, j*n:(j+1)*n] = block
    return L


def build_stacked(sys: LTVSystem) -> StackedOperators:
    '''
    Build the stacked operators of `sys`.

    :param sys: The system
    :type sys: :class:`LTVSystem`

    :returns: ``F = (I - Z blkA)^{-1} Z blkB`` and
        ``G = (I - Z blkA)^{-1} blkE`` together with the block diagonals
        and the downshift operator
    :rtype: :class:`StackedOperators`
    '''
    n, T = sys.n, sys.horizon
    nx = n * (T + 1)
    Z = np.kron(np.eye(T + 1, k=-1), np.eye(n))
    blkA = sla.block_diag(*sys.A_seq)
    blkB = sla.block_diag(*sys.B_seq)
    blkE = sla.block_diag(np.eye(n), *sys.E_seq)
    L = _transition_blocks(sys)
    F = L @ Z @ blkB
    G = L @ blkE
    # Structural zeros are exact; enforce them against rounding:
    F[:n, :] = 0.0
    for k in range(T + 1):
        F[k*n:(k+1)*n, k*sys.m:] = 0.0
    for mat in (F, G, blkA, blkB, blkE, Z):
        mat.setflags(write=False)
    logger.debug(f"Stacked operators built for horizon {T}, {nx} states.")
    return StackedOperators(F=F, G=G, blkA=blkA, blkB=blkB, blkE=blkE, Z=Z)


def noncausal_cost_operator(
    sys: LTVSystem,
    cost: CostSpec,
    ops: StackedOperators | None = None,
) -> BenchmarkOperator:
    '''
    The cost of the optimal non-causal controller,
    ``O = G' Q (I + F R^{-1} F' Q)^{-1} G``.

    :param sys: The system
    :param cost: The stage costs
    :param ops: Precomputed stacked operators of `sys`
    :type ops: :class:`StackedOperators`, optional

    :raises: :exc:`errors.NumericError` if the inner solve fails
    '''
    cost.check_against(sys)
    if ops is None:
        ops = build_stacked(sys)
    F, G, Q = ops.F, ops.G, cost.Q_blk
    try:
        RinvFt = sla.solve(cost.R_blk, F.T, assume_a='pos')
        inner = np.eye(F.shape[0]) + F @ RinvFt @ Q
        O = G.T @ Q @ np.linalg.solve(inner, G)
    except (np.linalg.LinAlgError, sla.LinAlgError) as e:
        raise NumericError(f"Benchmark operator solve failed: {e}") from None
    return BenchmarkOperator(O=symmetrize(O), n=sys.n)


def stack_delta(x0: Matrix, w_seq: DisturbanceSeq) -> Delta:
    '''Stack an initial state and a ``(T, p)`` disturbance sequence.'''
    return np.concatenate((
        np.asarray(x0, dtype=float).ravel(),
        np.asarray(w_seq, dtype=float).ravel(),
    ))


def split_delta(
    sys: LTVSystem,
    delta: Delta
) -> tuple[Matrix, DisturbanceSeq]:
    '''The inverse of :func:`stack_delta`.'''
    delta = np.asarray(delta, dtype=float).ravel()
    if delta.size != sys.delta_dim:
        raise DimensionMismatchError(
            f"delta has length {delta.size}, expected {sys.delta_dim}."
        )
    return delta[:sys.n], delta[sys.n:].reshape(sys.horizon, sys.p)


def noncausal_control(
    sys: LTVSystem,
    cost: CostSpec,
    delta: Delta,
    ops: StackedOperators | None = None,
) -> InputSeq:
    '''
    The optimal input sequence of a controller that knows `delta` in
    advance, ``-(R + F' Q F)^{-1} F' Q G delta``.

    :returns: Inputs with shape ``(T + 1, m)``
    '''
    delta = np.asarray(delta, dtype=float).ravel()
    if delta.size != sys.delta_dim:
        raise DimensionMismatchError(
            f"delta has length {delta.size}, expected {sys.delta_dim}."
        )
    if ops is None:
        ops = build_stacked(sys)
    F, G, Q = ops.F, ops.G, cost.Q_blk
    H = symmetrize(cost.R_blk + F.T @ Q @ F)
    u = -sla.solve(H, F.T @ Q @ (G @ delta), assume_a='pos')
    return u.reshape(sys.horizon + 1, sys.m)


def rollout_open_loop(
    sys: LTVSystem,
    x0: Matrix,
    u_seq: InputSeq,
    w_seq: DisturbanceSeq,
) -> StateSeq:
    '''
    Simulate the dynamics step by step with a fixed input sequence.

    :returns: States with shape ``(T + 1, n)``
    '''
    T, n = sys.horizon, sys.n
    x0 = np.asarray(x0, dtype=float).ravel()
    u_seq = np.asarray(u_seq, dtype=float).reshape(-1, sys.m)
    w_seq = np.asarray(w_seq, dtype=float).reshape(-1, sys.p)
    if x0.size != n or len(u_seq) != T + 1 or len(w_seq) != T:
        raise DimensionMismatchError(
            f"Expected x0 of length {n}, {T + 1} inputs and {T}"
            f" disturbances; got {x0.size}, {len(u_seq)} and {len(w_seq)}."
        )
    x = np.empty((T + 1, n))
    x[0] = x0
    for k in range(T):
        x[k+1] = (
            sys.A_seq[k] @ x[k] + sys.B_seq[k] @ u_seq[k]
            + sys.E_seq[k] @ w_seq[k]
        )
    return x


def evaluate_cost(
    sys: LTVSystem,
    cost: CostSpec,
    x0: Matrix,
    u_seq: InputSeq,
    w_seq: DisturbanceSeq,
) -> float:
    '''
    The cumulative cost ``x' Q_blk x + u' R_blk u`` along the rollout
    generated by `u_seq` and `w_seq`.
    '''
    x = rollout_open_loop(sys, x0, u_seq, w_seq)
    u = np.asarray(u_seq, dtype=float).reshape(-1, sys.m)
    total = sum(
        x[k] @ cost.Q_seq[k] @ x[k] + u[k] @ cost.R_seq[k] @ u[k]
        for k in range(sys.horizon + 1)
    )
    return float(total)
