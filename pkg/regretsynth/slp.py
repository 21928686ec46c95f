'''
System responses, controllers and the maps between them.

A response ``Phi = [Phi_x; Phi_u]`` maps ``delta = [x0; w_0; ...; w_{T-1}]``
to the stacked states and inputs. Its columns split into ``delta`` blocks:
block 0 is ``x0`` (width `n`) and block ``j >= 1`` is ``w_{j-1}``
(width `p`). A causal response lets row block `k` depend on blocks
``0..k`` only; those are the only entries stored.
'''

__all__ = (
    'Controller',
    'SystemResponse',
    'achievability_residual',
    'causal_pattern',
    'closed_loop_response',
    'recover_controller',
)


import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CausalityError, DimensionMismatchError, SingularResponseError
from .operators import CostSpec, LTVSystem, StackedOperators
from .utils import symmetrize
from ._types import Delta, Matrix

from collections.abc import Sequence
from typing import Self


logger = logging.getLogger(__name__)


def _readonly(mat) -> Matrix:
    mat = np.array(mat, dtype=float)
    mat.setflags(write=False)
    return mat


def causal_pattern(n: int, m: int, p: int, horizon: int) -> Matrix:
    '''
    Boolean mask of the entries of ``[Phi_x; Phi_u]`` a causal response
    may populate.
    '''
    T = horizon
    width = n + p * T
    mask = np.zeros(((n + m) * (T + 1), width), dtype=bool)
    for k in range(T + 1):
        mask[k*n:(k+1)*n, :n + p*k] = True
        row = n * (T + 1) + k * m
        mask[row:row + m, :n + p*k] = True
    return mask


@dataclass(frozen=True, eq=False)
class SystemResponse:
    '''
    The closed-loop maps from ``delta`` to stacked states and inputs,
    held as block rows.

    Causal responses store row `k` with width ``n + p k``; noncausal
    (full-block) responses store every row at the full width ``n + p T``.
    Dense matrices are built on demand.

    :param x_rows: ``T + 1`` state rows of height `n`
    :type x_rows: :class:`Sequence[Matrix]`

    :param u_rows: ``T + 1`` input rows of height `m`
    :type u_rows: :class:`Sequence[Matrix]`

    :param n: The state dimension
    :param p: The disturbance dimension

    :param causal: Whether rows are truncated to their causal width
    :type causal: :class:`bool`
    '''
    x_rows: tuple[Matrix, ...]
    u_rows: tuple[Matrix, ...]
    n: int
    p: int
    causal: bool = True

    def __post_init__(self) -> None:
        x_rows = tuple(_readonly(r) for r in self.x_rows)
        u_rows = tuple(_readonly(r) for r in self.u_rows)
        if len(x_rows) != len(u_rows) or not x_rows:
            raise DimensionMismatchError(
                f"Got {len(x_rows)} state rows and {len(u_rows)} input rows."
            )
        T = len(x_rows) - 1
        m = u_rows[0].shape[0]
        for k, (xr, ur) in enumerate(zip(x_rows, u_rows)):
            width = self.n + self.p * (k if self.causal else T)
            if xr.shape != (self.n, width) or ur.shape != (m, width):
                raise DimensionMismatchError(
                    f"Row {k} has shapes {xr.shape} and {ur.shape},"
                    f" expected ({self.n}, {width}) and ({m}, {width})."
                )
        object.__setattr__(self, 'x_rows', x_rows)
        object.__setattr__(self, 'u_rows', u_rows)

    @classmethod
    def from_dense(
        cls,
        Phi_x: Matrix,
        Phi_u: Matrix,
        n: int,
        p: int,
        causal: bool = True,
        tol: float = 0.0,
    ) -> Self:
        '''
        Split dense responses into block rows.

        :param tol: Largest magnitude tolerated above the causal
            structure; those entries are dropped
        :type tol: :class:`float`

        :raises: :exc:`errors.CausalityError` if `causal` and an entry
            above the causal structure exceeds `tol`
        '''
        Phi_x = np.asarray(Phi_x, dtype=float)
        Phi_u = np.asarray(Phi_u, dtype=float)
        rows = Phi_x.shape[0] // n
        T = rows - 1
        if Phi_x.shape != (n * rows, n + p * T) or Phi_u.shape[0] % rows:
            raise DimensionMismatchError(
                f"Response shapes {Phi_x.shape} and {Phi_u.shape} do not"
                f" match n = {n}, p = {p}."
            )
        m = Phi_u.shape[0] // rows

        if causal:
            mask = causal_pattern(n, m, p, T)
            excess = np.abs(np.vstack((Phi_x, Phi_u))[~mask])
            if excess.size and excess.max() > tol:
                raise CausalityError(
                    f"Response has an entry of size {excess.max():.3g}"
                    " above its causal structure."
                )

        def width(k):
            return n + p * (k if causal else T)

        return cls(
            x_rows=[Phi_x[k*n:(k+1)*n, :width(k)] for k in range(rows)],
            u_rows=[Phi_u[k*m:(k+1)*m, :width(k)] for k in range(rows)],
            n=n,
            p=p,
            causal=causal,
        )

    @property
    def horizon(self) -> int:
        return len(self.x_rows) - 1

    @property
    def m(self) -> int:
        return self.u_rows[0].shape[0]

    @property
    def delta_dim(self) -> int:
        return self.n + self.p * self.horizon

    def _dense(self, rows: Sequence[Matrix]) -> Matrix:
        height = rows[0].shape[0]
        out = np.zeros((height * len(rows), self.delta_dim))
        for k, row in enumerate(rows):
            out[k*height:(k+1)*height, :row.shape[1]] = row
        out.setflags(write=False)
        return out

    @cached_property
    def Phi_x(self) -> Matrix:
        return self._dense(self.x_rows)

    @cached_property
    def Phi_u(self) -> Matrix:
        return self._dense(self.u_rows)

    @cached_property
    def Phi(self) -> Matrix:
        '''The stacked ``[Phi_x; Phi_u]``.'''
        out = np.vstack((self.Phi_x, self.Phi_u))
        out.setflags(write=False)
        return out

    @property
    def Phi_0(self) -> Matrix:
        '''The columns acting on ``x0``.'''
        return self.Phi[:, :self.n]

    @property
    def Phi_w(self) -> Matrix:
        '''The columns acting on the disturbances.'''
        return self.Phi[:, self.n:]

    def cost_matrix(self, cost: CostSpec) -> Matrix:
        '''The closed-loop cost ``Phi' C Phi`` as a form in ``delta``.'''
        CPhi = cost.C_sqrt @ self.Phi
        return symmetrize(CPhi.T @ CPhi)

    def apply(self, delta: Delta) -> tuple[Matrix, Matrix]:
        '''States ``(T + 1, n)`` and inputs ``(T + 1, m)`` for `delta`.'''
        delta = np.asarray(delta, dtype=float).ravel()
        if delta.size != self.delta_dim:
            raise DimensionMismatchError(
                f"delta has length {delta.size}, expected {self.delta_dim}."
            )
        x = (self.Phi_x @ delta).reshape(self.horizon + 1, self.n)
        u = (self.Phi_u @ delta).reshape(self.horizon + 1, self.m)
        return x, u


@dataclass(frozen=True, eq=False)
class Controller:
    '''
    A causal time-varying state feedback ``u_k = sum_{j<=k} K_{k,j} x_j``.

    :param rows: ``T + 1`` gain rows, row `k` of shape ``(m, n (k + 1))``
    :type rows: :class:`Sequence[Matrix]`
    '''
    rows: tuple[Matrix, ...]

    def __post_init__(self) -> None:
        rows = tuple(_readonly(r) for r in self.rows)
        if not rows:
            raise DimensionMismatchError("A controller needs a gain row.")
        m, n = rows[0].shape
        for k, row in enumerate(rows):
            if row.shape != (m, n * (k + 1)):
                raise DimensionMismatchError(
                    f"Gain row {k} has shape {row.shape},"
                    f" expected {(m, n * (k + 1))}."
                )
        object.__setattr__(self, 'rows', rows)

    @classmethod
    def zeros(cls, sys: LTVSystem) -> Self:
        return cls([
            np.zeros((sys.m, sys.n * (k + 1))) for k in range(sys.horizon + 1)
        ])

    @classmethod
    def from_dense(cls, K: Matrix, n: int, m: int, tol: float = 0.0) -> Self:
        '''
        :raises: :exc:`errors.CausalityError` when `K` has an entry above
            its block diagonal larger than `tol`
        '''
        K = np.asarray(K, dtype=float)
        rows = K.shape[0] // m
        if K.shape != (m * rows, n * rows):
            raise DimensionMismatchError(
                f"Gain shape {K.shape} does not match n = {n}, m = {m}."
            )
        for k in range(rows):
            upper = K[k*m:(k+1)*m, n*(k+1):]
            if upper.size and np.abs(upper).max() > tol:
                raise CausalityError(
                    f"Gain row {k} acts on future states."
                )
        return cls([K[k*m:(k+1)*m, :n*(k+1)] for k in range(rows)])

    @property
    def horizon(self) -> int:
        return len(self.rows) - 1

    @property
    def m(self) -> int:
        return self.rows[0].shape[0]

    @property
    def n(self) -> int:
        return self.rows[0].shape[1]

    def block(self, k: int, j: int) -> Matrix:
        '''The gain ``K_{k,j}`` from ``x_j`` to ``u_k``.'''
        if j > k:
            return np.zeros((self.m, self.n))
        return self.rows[k][:, j*self.n:(j+1)*self.n]

    @cached_property
    def K(self) -> Matrix:
        n, m, T = self.n, self.m, self.horizon
        out = np.zeros((m * (T + 1), n * (T + 1)))
        for k, row in enumerate(self.rows):
            out[k*m:(k+1)*m, :row.shape[1]] = row
        out.setflags(write=False)
        return out

    def perturbed(self, scale: float) -> Self:
        '''Every gain multiplied by `scale`.'''
        return type(self)([row * scale for row in self.rows])


def achievability_residual(
    phi: SystemResponse,
    ops: StackedOperators
) -> float:
    '''
    The Frobenius norm of ``[I - Z blkA, -Z blkB] Phi - blkE``.

    :param phi: The response to check
    :type phi: :class:`SystemResponse`

    :param ops: Stacked operators of the system
    :type ops: :class:`StackedOperators`
    '''
    lhs = ops.achievability_lhs
    if lhs.shape[1] != phi.Phi.shape[0] or ops.blkE.shape[1] != phi.delta_dim:
        raise DimensionMismatchError(
            f"Response of shape {phi.Phi.shape} does not fit operators"
            f" with {lhs.shape[1]} stacked signals."
        )
    return float(np.linalg.norm(lhs @ phi.Phi - ops.blkE, 'fro'))


def recover_controller(
    phi: SystemResponse,
    rank_tol: float | None = None
) -> Controller:
    '''
    Recover ``K = Phi_u Phi_x^{-1}`` row by row.

    Each row solves ``U_k = sum_j K_{k,j} X_j`` by back substitution over
    ``delta`` blocks, using right inverses of the diagonal blocks
    ``X_{0,0} = I`` and ``X_{l,l} = E_{l-1}`` of the state response.

    :param phi: A causal achievable response
    :type phi: :class:`SystemResponse`

    :param rank_tol: Rank tolerance for the diagonal blocks,
        defaults to NumPy's
    :type rank_tol: :class:`float`, optional

    :returns: The block-lower-triangular gain
    :rtype: :class:`Controller`

    :raises: :exc:`errors.CausalityError` for a noncausal response
    :raises: :exc:`errors.SingularResponseError` when a diagonal block
        has rank below `n`
    '''
    if not phi.causal:
        raise CausalityError("Only causal responses define a controller.")
    n, p, T = phi.n, phi.p, phi.horizon

    def cols(l):
        return slice(0, n) if l == 0 else slice(n + p*(l-1), n + p*l)

    right_inv = []
    for l in range(T + 1):
        diag = phi.x_rows[l][:, cols(l)]
        if np.linalg.matrix_rank(diag, tol=rank_tol) < n:
            raise SingularResponseError(
                f"Diagonal block {l} of the state response is rank"
                f" deficient; the response is not achievable."
            )
        right_inv.append(np.linalg.pinv(diag))

    rows = []
    for k in range(T + 1):
        U = phi.u_rows[k]
        gains: dict[int, Matrix] = {}
        for l in range(k, -1, -1):
            rhs = U[:, cols(l)].copy()
            for j in range(l + 1, k + 1):
                rhs -= gains[j] @ phi.x_rows[j][:, cols(l)]
            gains[l] = rhs @ right_inv[l]
        rows.append(np.hstack([gains[j] for j in range(k + 1)]))
    return Controller(rows)


def closed_loop_response(sys: LTVSystem, K: Controller) -> SystemResponse:
    '''
    The response ``Phi_x = (I - Z (blkA + blkB K))^{-1} blkE``,
    ``Phi_u = K Phi_x`` built row by row through the dynamics.

    :param sys: The system
    :type sys: :class:`LTVSystem`

    :param K: A causal controller for `sys`
    :type K: :class:`Controller`

    :rtype: :class:`SystemResponse`
    '''
    n, m, p, T = sys.n, sys.m, sys.p, sys.horizon
    if (K.n, K.m, K.horizon) != (n, m, T):
        raise DimensionMismatchError(
            f"Controller with (n, m, T) = {(K.n, K.m, K.horizon)} does not"
            f" fit a system with {(n, m, T)}."
        )
    x_rows = [np.eye(n)]
    u_rows = []
    for k in range(T + 1):
        width = n + p * k
        U = np.zeros((m, width))
        for j in range(k + 1):
            X = x_rows[j]
            U[:, :X.shape[1]] += K.block(k, j) @ X
        u_rows.append(U)
        if k < T:
            nxt = np.zeros((n, width + p))
            nxt[:, :width] = sys.A_seq[k] @ x_rows[k] + sys.B_seq[k] @ U
            nxt[:, width:] = sys.E_seq[k]
            x_rows.append(nxt)
    return SystemResponse(x_rows=x_rows, u_rows=u_rows, n=n, p=p)
