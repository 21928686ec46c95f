'''
A small conic-program representation and its solver backend.

Programs are linear objectives over one flat variable vector ``x`` with
affine equality, nonnegativity, linear-matrix-inequality and second-order
cone constraints. Affine matrix expressions are stored as a sparse
coefficient matrix acting on ``x`` plus a constant, in row-major order, so
every LMI is a sum of symmetric matrices scaled by variables plus a
constant block.
'''

__all__ = (
    'AffineMatrix',
    'ConicProgram',
    'Constraint',
    'ConstraintResidual',
    'ResidualReport',
    'SolveReport',
    'SolverSettings',
    'bmat',
    'solve',
    'validate_solution',
)


import json
import logging
import time
from dataclasses import dataclass, field, replace
from numbers import Real
from os import PathLike

import cvxpy as cp
import numpy as np
import scipy.sparse as sp

from .constants import (
    DEFAULT_BACKEND,
    FEAS_TOL,
    GAP_TOL,
    MAX_ITERS,
    SYMMETRY_TOL,
)
from .errors import (
    AsymmetricCoefficientError,
    DimensionMismatchError,
    ProgramSealedError,
)
from .utils import as_matrix, join_options, min_eig
from ._types import BackendName, Matrix, SolverStatus, Vector

from collections.abc import Iterator, Sequence
from typing import Any, Literal, NamedTuple, Self


logger = logging.getLogger(__name__)


type ConstraintKind = Literal['equality', 'nonnegative', 'lmi', 'soc']
type Operand = AffineMatrix | Matrix | Real


class AffineMatrix:
    '''
    A matrix whose entries are affine in the program variables.

    Entry ``(i, j)`` of the value at ``x`` is
    ``coef[i * cols + j] @ x + const[i, j]``.
    NumPy arrays on the left of ``@`` defer to :meth:`__rmatmul__`.

    :param coef: Coefficients with one row per entry
    :type coef: :class:`scipy.sparse.spmatrix`

    :param const: The constant part
    :type const: :class:`Matrix`
    '''
    __array_ufunc__ = None

    def __init__(self, coef: sp.spmatrix, const: Matrix) -> None:
        const = np.array(const, dtype=float, ndmin=2)
        coef = sp.csr_matrix(coef)
        if coef.shape[0] != const.size:
            raise DimensionMismatchError(
                f"{coef.shape[0]} coefficient rows for a matrix"
                f" of shape {const.shape}."
            )
        self.coef = coef
        self.const = const

    @classmethod
    def constant(cls, mat: Matrix | Real, nvar: int = 0) -> Self:
        mat = as_matrix(mat)
        return cls(sp.csr_matrix((mat.size, nvar)), mat)

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @property
    def nvar(self) -> int:
        return self.coef.shape[1]

    @property
    def is_scalar(self) -> bool:
        return self.shape == (1, 1)

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(shape={self.shape},"
            f" nvar={self.nvar}, nnz={self.coef.nnz})"
        )

    def coef_to(self, nvar: int) -> sp.csr_matrix:
        '''The coefficient matrix padded with zero columns to `nvar`.'''
        if nvar < self.nvar:
            raise DimensionMismatchError(
                f"Cannot narrow {self.nvar} coefficient columns to {nvar}."
            )
        if nvar == self.nvar:
            return self.coef
        pad = sp.csr_matrix((self.coef.shape[0], nvar - self.nvar))
        return sp.hstack((self.coef, pad), format='csr')

    def widen(self, nvar: int) -> Self:
        return type(self)(self.coef_to(nvar), self.const)

    @staticmethod
    def lift(other: Operand, shape: tuple[int, int]) -> 'AffineMatrix':
        '''Coerce constants (broadcast to `shape`) to expressions.'''
        if isinstance(other, AffineMatrix):
            return other
        arr = np.broadcast_to(np.asarray(other, dtype=float), shape)
        return AffineMatrix.constant(arr)

    def __add__(self, other: Operand) -> Self:
        other = self.lift(other, self.shape)
        if other.shape != self.shape:
            raise DimensionMismatchError(
                f"Cannot add shapes {self.shape} and {other.shape}."
            )
        nvar = max(self.nvar, other.nvar)
        return type(self)(
            self.coef_to(nvar) + other.coef_to(nvar),
            self.const + other.const
        )

    __radd__ = __add__

    def __neg__(self) -> Self:
        return type(self)(-self.coef, -self.const)

    def __sub__(self, other: Operand) -> Self:
        return self + (-self.lift(other, self.shape))

    def __rsub__(self, other: Operand) -> Self:
        return self.lift(other, self.shape) + (-self)

    def __mul__(self, scale: Real) -> Self:
        if not isinstance(scale, Real):
            return NotImplemented
        return type(self)(self.coef * float(scale), self.const * float(scale))

    __rmul__ = __mul__

    def __matmul__(self, right: Matrix) -> Self:
        if isinstance(right, AffineMatrix):
            raise TypeError("The product of two expressions is not affine.")
        right = as_matrix(right)
        rows, cols = self.shape
        if right.shape[0] != cols:
            raise DimensionMismatchError(
                f"Cannot multiply shapes {self.shape} and {right.shape}."
            )
        op = sp.kron(sp.identity(rows), sp.csr_matrix(right.T), format='csr')
        return type(self)(op @ self.coef, self.const @ right)

    def __rmatmul__(self, left: Matrix) -> Self:
        left = as_matrix(left)
        rows, cols = self.shape
        if left.shape[1] != rows:
            raise DimensionMismatchError(
                f"Cannot multiply shapes {left.shape} and {self.shape}."
            )
        op = sp.kron(sp.csr_matrix(left), sp.identity(cols), format='csr')
        return type(self)(op @ self.coef, left @ self.const)

    @property
    def T(self) -> Self:
        rows, cols = self.shape
        perm = np.arange(rows * cols).reshape(rows, cols).T.ravel()
        return type(self)(self.coef[perm], self.const.T)

    def __getitem__(self, key) -> Self:
        rows, cols = self.shape
        idx = np.arange(rows * cols).reshape(rows, cols)[key]
        if idx.ndim != 2:
            raise IndexError("Index expressions with slices to keep two axes.")
        return type(self)(self.coef[idx.ravel()], self.const[key])

    def times(self, mat: Matrix) -> Self:
        '''Scale the constant matrix `mat` by this 1x1 expression.'''
        if not self.is_scalar:
            raise DimensionMismatchError(
                f"Only 1x1 expressions scale matrices, not {self.shape}."
            )
        mat = as_matrix(mat)
        coef = sp.csr_matrix(mat.reshape(-1, 1)) @ self.coef
        return type(self)(coef, self.const[0, 0] * mat)

    def vec(self) -> Self:
        '''Stack the entries row by row into a column.'''
        return type(self)(self.coef, self.const.reshape(-1, 1))

    def value(self, x: Vector) -> Matrix:
        x = np.asarray(x, dtype=float).ravel()
        if x.size < self.nvar:
            raise DimensionMismatchError(
                f"Solution has {x.size} entries, expression uses {self.nvar}."
            )
        flat = self.coef @ x[:self.nvar] + self.const.ravel()
        return flat.reshape(self.shape)

    def scalar_value(self, x: Vector) -> float:
        return float(self.value(x)[0, 0])


def bmat(blocks: Sequence[Sequence[Operand | None]]) -> AffineMatrix:
    '''
    Assemble a block matrix from expressions, constants and ``None``
    (zero) blocks. Every block row and block column needs at least one
    block whose shape is known.
    '''
    n_rows, n_cols = len(blocks), len(blocks[0])
    heights: list[int | None] = [None] * n_rows
    widths: list[int | None] = [None] * n_cols

    def shape_of(blk):
        if isinstance(blk, AffineMatrix):
            return blk.shape
        return as_matrix(blk).shape

    for i, row in enumerate(blocks):
        if len(row) != n_cols:
            raise DimensionMismatchError("Block rows differ in length.")
        for j, blk in enumerate(row):
            if blk is None:
                continue
            h, w = shape_of(blk)
            if heights[i] not in (None, h) or widths[j] not in (None, w):
                raise DimensionMismatchError(
                    f"Block ({i}, {j}) has inconsistent shape {(h, w)}."
                )
            heights[i], widths[j] = h, w
    if None in heights or None in widths:
        raise DimensionMismatchError("Cannot infer the size of an empty block.")

    row_off = np.concatenate(([0], np.cumsum(heights)))
    col_off = np.concatenate(([0], np.cumsum(widths)))
    total_rows, total_cols = int(row_off[-1]), int(col_off[-1])
    nvar = max(
        (blk.nvar for row in blocks for blk in row
            if isinstance(blk, AffineMatrix)),
        default=0
    )

    const = np.zeros((total_rows, total_cols))
    parts, index = [], []
    for i, row in enumerate(blocks):
        for j, blk in enumerate(row):
            if blk is None:
                continue
            expr = AffineMatrix.lift(blk, (heights[i], widths[j]))
            r0, c0 = row_off[i], col_off[j]
            const[r0:r0+heights[i], c0:c0+widths[j]] = expr.const
            if expr.nvar == 0 and nvar == 0:
                continue
            flat = (
                (r0 + np.arange(heights[i]))[:, None] * total_cols
                + (c0 + np.arange(widths[j]))[None, :]
            ).ravel()
            parts.append(expr.coef_to(nvar))
            index.append(flat)

    if not parts:
        return AffineMatrix.constant(const, nvar)
    stacked = sp.vstack(parts, format='csr')
    idx = np.concatenate(index)
    select = sp.csr_matrix(
        (np.ones(idx.size), (idx, np.arange(idx.size))),
        shape=(total_rows * total_cols, idx.size)
    )
    return AffineMatrix(select @ stacked, const)


@dataclass(frozen=True)
class Constraint:
    '''
    A stored constraint. SOC constraints keep ``[t; v]`` as one column
    meaning ``||v|| <= t``.
    '''
    kind: ConstraintKind
    name: str
    expr: AffineMatrix


class ConicProgram:
    '''
    A linear objective with affine conic constraints over one flat
    variable vector. Programs are sealed before solving; a sealed program
    refuses new variables and constraints.

    :param name: Used in logs and dumps
    :type name: :class:`str`
    '''
    def __init__(self, name: str = 'program') -> None:
        self.name = name
        self._nvar = 0
        self._constraints: list[Constraint] = []
        self._objective = AffineMatrix.constant(0.0)
        self._sealed = False
        self._blocks: dict[str, tuple[int, int]] = {}

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}({self.name!r},"
            f" variables={self._nvar},"
            f" constraints={len(self._constraints)})"
        )

    @property
    def n_variables(self) -> int:
        return self._nvar

    @property
    def sealed(self) -> bool:
        return self._sealed

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return tuple(self._constraints)

    @property
    def objective(self) -> AffineMatrix:
        return self._objective

    @property
    def lmi_sizes(self) -> tuple[int, ...]:
        return tuple(
            c.expr.shape[0] for c in self._constraints if c.kind == 'lmi'
        )

    def _check_open(self) -> None:
        if self._sealed:
            raise ProgramSealedError(f"Program {self.name!r} is sealed.")

    def variable(
        self,
        shape: tuple[int, int],
        pattern: Matrix | None = None,
        name: str | None = None,
    ) -> AffineMatrix:
        '''
        Allocate a matrix variable.

        :param shape: The matrix shape
        :type shape: :class:`tuple[int, int]`

        :param pattern: Boolean mask of the free entries; the others are
            structural zeros. Defaults to all entries free.
        :type pattern: :class:`Matrix`, optional

        :param name: A label for dumps
        :type name: :class:`str`, optional
        '''
        self._check_open()
        if pattern is None:
            pattern = np.ones(shape, dtype=bool)
        pattern = np.asarray(pattern, dtype=bool)
        if pattern.shape != tuple(shape):
            raise DimensionMismatchError(
                f"Pattern shape {pattern.shape} differs from {shape}."
            )
        rows = np.flatnonzero(pattern.ravel())
        start = self._nvar
        self._nvar += rows.size
        coef = sp.csr_matrix(
            (np.ones(rows.size), (rows, start + np.arange(rows.size))),
            shape=(pattern.size, self._nvar)
        )
        label = name or f"var{len(self._blocks)}"
        self._blocks[label] = (start, self._nvar)
        return AffineMatrix(coef, np.zeros(shape))

    def scalar(self, name: str | None = None) -> AffineMatrix:
        return self.variable((1, 1), name=name)

    def _add(self, kind: ConstraintKind, expr: AffineMatrix, name) -> None:
        self._check_open()
        name = name or f"{kind}{len(self._constraints)}"
        self._constraints.append(Constraint(kind, name, expr))

    def add_equality(
        self,
        expr: AffineMatrix,
        rhs: Matrix | Real = 0.0,
        name: str | None = None
    ) -> None:
        '''Require ``expr == rhs`` entrywise.'''
        self._add('equality', expr - rhs, name)

    def add_nonnegative(self, expr: AffineMatrix, name: str | None = None):
        '''Require ``expr >= 0`` entrywise.'''
        self._add('nonnegative', expr, name)

    def add_lmi(self, expr: AffineMatrix, name: str | None = None) -> None:
        '''
        Require the square expression to be positive semidefinite.

        :raises: :exc:`errors.AsymmetricCoefficientError` when a
            coefficient matrix or the constant block is asymmetric by
            more than :obj:`constants.SYMMETRY_TOL`
        '''
        rows, cols = expr.shape
        if rows != cols:
            raise DimensionMismatchError(
                f"An LMI must be square, got shape {expr.shape}."
            )
        flipped = expr.T
        gap = abs(expr.coef - flipped.coef).max() if expr.coef.nnz else 0.0
        gap = max(gap, np.max(np.abs(expr.const - flipped.const), initial=0))
        if gap > SYMMETRY_TOL:
            raise AsymmetricCoefficientError(
                f"LMI {name or len(self._constraints)!r} has asymmetric"
                f" coefficients (deviation {gap:.3g})."
            )
        self._add('lmi', 0.5 * (expr + flipped), name)

    def add_soc(
        self,
        t: AffineMatrix,
        v: AffineMatrix,
        name: str | None = None
    ) -> None:
        '''Require ``||v||_2 <= t`` for a 1x1 `t` and any-shaped `v`.'''
        if not t.is_scalar:
            raise DimensionMismatchError("The cone bound must be 1x1.")
        self._add('soc', bmat([[t], [v.vec()]]), name)

    def minimize(self, expr: AffineMatrix) -> None:
        self._check_open()
        if not expr.is_scalar:
            raise DimensionMismatchError("The objective must be 1x1.")
        self._objective = expr

    def seal(self) -> Self:
        '''Freeze the program and pad every expression to full width.'''
        if self._sealed:
            return self
        nvar = self._nvar
        self._constraints = [
            replace(c, expr=c.expr.widen(nvar)) for c in self._constraints
        ]
        self._objective = self._objective.widen(nvar)
        self._sealed = True
        return self

    def dump(self, file: PathLike) -> None:
        '''
        Write the sealed program as JSON with sparse triplets per
        constraint. Unsealed programs are sealed first.
        '''
        self.seal()

        def triplets(expr: AffineMatrix) -> dict:
            coo = expr.coef.tocoo()
            return dict(
                shape=list(expr.shape),
                rows=coo.row.tolist(),
                cols=coo.col.tolist(),
                vals=coo.data.tolist(),
                const=expr.const.ravel().tolist(),
            )

        data = dict(
            name=self.name,
            n_variables=self._nvar,
            variables={k: list(v) for k, v in self._blocks.items()},
            objective=triplets(self._objective),
            constraints=[
                dict(kind=c.kind, name=c.name, **triplets(c.expr))
                for c in self._constraints
            ],
        )
        with open(file, 'w') as f:
            json.dump(data, f, indent=2)
        logger.debug(f"Dumped program {self.name!r} to {file!r}")


@dataclass(frozen=True)
class SolverSettings:
    '''
    Options passed to the backend.

    :param backend: The cvxpy solver name, ``'CLARABEL'`` or ``'SCS'``
    :param feas_tol: Primal/dual feasibility tolerance
    :param gap_tol: Duality gap tolerance
    :param max_iters: Iteration cap, the backend's own default when ``None``
        (:obj:`constants.MAX_ITERS` for CLARABEL)
    '''
    backend: BackendName = DEFAULT_BACKEND
    feas_tol: float = FEAS_TOL
    gap_tol: float = GAP_TOL
    max_iters: int | None = None
    verbose: bool = False

    def __post_init__(self) -> None:
        if self.backend not in ('CLARABEL', 'SCS'):
            raise ValueError(
                f"Unknown backend {self.backend!r}, expected "
                + join_options(('CLARABEL', 'SCS'))
            )
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError(
                f"max_iters must be positive, got {self.max_iters}."
            )

    def with_tol(self, tol: float) -> Self:
        return replace(self, feas_tol=tol, gap_tol=tol)

    def backend_options(self) -> dict[str, Any]:
        match self.backend:
            case 'CLARABEL':
                return dict(
                    tol_gap_abs=self.gap_tol,
                    tol_gap_rel=self.gap_tol,
                    tol_feas=self.feas_tol,
                    max_iter=self.max_iters or MAX_ITERS,
                )
            case 'SCS':
                opts = dict(eps_abs=self.feas_tol, eps_rel=self.gap_tol)
                if self.max_iters is not None:
                    opts['max_iters'] = self.max_iters
                return opts


class ConstraintResidual(NamedTuple):
    name: str
    kind: ConstraintKind
    residual: float


@dataclass(frozen=True)
class ResidualReport:
    '''
    Violation of every constraint at a given point: the largest absolute
    equality error, the largest negative part of nonnegative entries,
    the negative part of the smallest LMI eigenvalue, and the excess of
    the norm over the cone bound.
    '''
    entries: tuple[ConstraintResidual, ...]
    tol: float

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ConstraintResidual]:
        return iter(self.entries)

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def failures(self) -> tuple[ConstraintResidual, ...]:
        return tuple(e for e in self.entries if e.residual > self.tol)

    def as_dict(self) -> dict[str, float]:
        return {e.name: e.residual for e in self.entries}


@dataclass(frozen=True)
class SolveReport:
    '''
    The outcome of :func:`solve`. `x` and `objective` are ``None`` unless
    the backend returned a point.
    '''
    status: SolverStatus
    x: Vector | None
    objective: float | None
    primal_residual: float | None
    # cvxpy does not expose backend dual residuals:
    dual_residual: float | None
    iterations: int | None
    solve_time: float
    backend: BackendName
    residuals: ResidualReport | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status in ('optimal', 'near_optimal')


def validate_solution(
    program: ConicProgram,
    solution: Vector,
    tol: float = FEAS_TOL
) -> ResidualReport:
    '''
    Recompute every constraint residual of `program` at `solution`
    without consulting the backend.

    :param program: The program
    :type program: :class:`ConicProgram`

    :param solution: The variable vector
    :type solution: :class:`Vector`

    :param tol: The threshold used by :attr:`ResidualReport.passed`
    :type tol: :class:`float`
    '''
    x = np.asarray(solution, dtype=float).ravel()
    entries = []
    for con in program.constraints:
        val = con.expr.value(x)
        match con.kind:
            case 'equality':
                res = np.max(np.abs(val), initial=0.0)
            case 'nonnegative':
                res = max(0.0, -np.min(val, initial=0.0))
            case 'lmi':
                res = max(0.0, -min_eig(val))
            case 'soc':
                flat = val.ravel()
                res = max(0.0, np.linalg.norm(flat[1:]) - flat[0])
        entries.append(ConstraintResidual(con.name, con.kind, float(res)))
    return ResidualReport(tuple(entries), tol)


_STATUS_MAP: dict[str, SolverStatus] = {
    cp.OPTIMAL: 'optimal',
    cp.OPTIMAL_INACCURATE: 'near_optimal',
    cp.INFEASIBLE: 'infeasible',
    cp.INFEASIBLE_INACCURATE: 'infeasible',
    cp.UNBOUNDED: 'unbounded',
    cp.UNBOUNDED_INACCURATE: 'unbounded',
}


def _to_cvxpy(program: ConicProgram, x: cp.Variable) -> list[cp.Constraint]:
    cons = []
    for con in program.constraints:
        expr = con.expr
        flat = expr.coef @ x + expr.const.ravel()
        match con.kind:
            case 'equality':
                cons.append(flat == 0)
            case 'nonnegative':
                cons.append(flat >= 0)
            case 'lmi':
                d = expr.shape[0]
                S = cp.reshape(flat, (d, d), order='C')
                cons.append(0.5 * (S + S.T) >> 0)
            case 'soc':
                cons.append(cp.SOC(flat[0], flat[1:]))
    return cons


def _solve_constant(program: ConicProgram, settings: SolverSettings):
    '''Programs without variables are feasible or not by inspection.'''
    x = np.zeros(0)
    residuals = validate_solution(program, x, settings.feas_tol)
    status = 'optimal' if residuals.passed else 'infeasible'
    return SolveReport(
        status=status,
        x=x if residuals.passed else None,
        objective=program.objective.scalar_value(x),
        primal_residual=residuals.max_residual,
        dual_residual=None,
        iterations=0,
        solve_time=0.0,
        backend=settings.backend,
        residuals=residuals,
    )


def solve(
    program: ConicProgram,
    settings: SolverSettings | None = None
) -> SolveReport:
    '''
    Seal `program` and solve it with cvxpy.

    Infeasible, unbounded and failed solves are reported through
    :attr:`SolveReport.status`, never raised. A backend "optimal" whose
    independently validated residual exceeds the feasibility tolerance
    is downgraded to ``'near_optimal'``.

    :param program: The program to solve
    :type program: :class:`ConicProgram`

    :param settings: Backend options, defaults to :class:`SolverSettings()`
    :type settings: :class:`SolverSettings`

    :rtype: :class:`SolveReport`
    '''
    if settings is None:
        settings = SolverSettings()
    program.seal()
    if program.n_variables == 0:
        return _solve_constant(program, settings)

    logger.info(
        f"Solving {program.name!r} with {settings.backend}:"
        f" {program.n_variables} variables,"
        f" {len(program.constraints)} constraints,"
        f" LMI sizes {list(program.lmi_sizes)}"
    )
    x = cp.Variable(program.n_variables)
    obj = program.objective
    problem = cp.Problem(
        cp.Minimize(cp.sum(obj.coef @ x) + obj.const[0, 0]),
        _to_cvxpy(program, x)
    )

    start = time.perf_counter()
    try:
        problem.solve(
            solver=settings.backend,
            verbose=settings.verbose,
            **settings.backend_options()
        )
    except cp.error.SolverError as e:
        elapsed = time.perf_counter() - start
        logger.warning(f"Backend failure on {program.name!r}: {e}")
        return SolveReport(
            status='numerical_failure',
            x=None,
            objective=None,
            primal_residual=None,
            dual_residual=None,
            iterations=None,
            solve_time=elapsed,
            backend=settings.backend,
        )
    elapsed = time.perf_counter() - start

    status = _STATUS_MAP.get(problem.status, 'numerical_failure')
    stats = problem.solver_stats
    iterations = getattr(stats, 'num_iters', None)

    if status not in ('optimal', 'near_optimal') or x.value is None:
        logger.info(
            f"{program.name!r} finished with status {status!r}"
            f" after {elapsed:.3f} s"
        )
        if status in ('optimal', 'near_optimal'):
            status = 'numerical_failure'
        return SolveReport(
            status=status,
            x=None,
            objective=None,
            primal_residual=None,
            dual_residual=None,
            iterations=iterations,
            solve_time=elapsed,
            backend=settings.backend,
        )

    sol = np.asarray(x.value, dtype=float)
    residuals = validate_solution(program, sol, settings.feas_tol)
    if status == 'optimal' and not residuals.passed:
        logger.debug(
            f"Downgrading {program.name!r} to near_optimal:"
            f" residual {residuals.max_residual:.3g}"
            f" exceeds {settings.feas_tol:g}"
        )
        status = 'near_optimal'

    objective = obj.scalar_value(sol)
    logger.info(
        f"{program.name!r} finished with status {status!r},"
        f" objective {objective:.6g}, residual {residuals.max_residual:.2g},"
        f" {elapsed:.3f} s"
    )
    return SolveReport(
        status=status,
        x=sol,
        objective=objective,
        primal_residual=residuals.max_residual,
        dual_residual=None,
        iterations=iterations,
        solve_time=elapsed,
        backend=settings.backend,
        residuals=residuals,
    )
