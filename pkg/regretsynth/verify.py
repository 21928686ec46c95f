'''
Oracles that certify or bound synthesis results independently of the
conic programs that produced them.

All of them work with the regret form ``R = Phi' C Phi - O`` over
``delta = [x0; w]`` and a weight ``W``; a level ``mu`` is certified when
``delta' (R - mu W) delta <= 0`` over the disturbance set.
'''

__all__ = (
    'ChainReport',
    'WorstCaseDisturbance',
    'check_inequality_chain',
    'energy_ball_violation',
    'local_level_lower_bound',
    'polytopic_exact_level',
    'regret_matrix',
    'regret_psd_margin',
    'sample_certificate',
    'single_ellipsoid_level',
    'suboptimality_floor',
    'tight_level_adversarial',
    'tight_level_zero_init',
    'worst_case_disturbance_zero_init',
)


import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .constants import CONDITION_LIMIT
from .errors import CombinatorialBudgetError, ConditioningError
from .errors import DimensionMismatchError
from .operators import BenchmarkOperator, CostSpec
from .sim import sample_ball, sample_ellipsoid
from .slp import SystemResponse
from .synthesis import (
    AdversarialInit,
    DisturbanceModel,
    EnergyBall,
    Instance,
    PointwiseEllipsoid,
    RegretWeight,
    ZeroInit,
    synth_energy_ball,
    synth_pointwise,
)
from .utils import condition_number, inv_sqrt, min_eig, symmetrize
from ._types import DisturbanceSeq, Matrix, Vector

from collections.abc import Sequence
from typing import NamedTuple


logger = logging.getLogger(__name__)


VERTEX_BUDGET = 100_000
ASCENT_RESTARTS = 50
ASCENT_ITERS = 200
ASCENT_HALVINGS = 10


def _weight_matrix(W: RegretWeight | Matrix) -> Matrix:
    return W.W if isinstance(W, RegretWeight) else np.asarray(W, dtype=float)


def _benchmark_matrix(O: BenchmarkOperator | Matrix) -> Matrix:
    return O.O if isinstance(O, BenchmarkOperator) else np.asarray(O, float)


def regret_matrix(
    phi: SystemResponse,
    cost: CostSpec,
    O: BenchmarkOperator | Matrix,
) -> Matrix:
    '''The regret form ``Phi' C Phi - O`` over ``delta``.'''
    return symmetrize(phi.cost_matrix(cost) - _benchmark_matrix(O))


def regret_psd_margin(
    phi: SystemResponse,
    cost: CostSpec,
    O: BenchmarkOperator | Matrix,
) -> float:
    '''The smallest eigenvalue of the regret form, nonnegative when the
    benchmark is the unconstrained non-causal cost.'''
    return min_eig(regret_matrix(phi, cost, O))


def _top_eig(mat: Matrix) -> tuple[float, Vector, bool]:
    '''The largest eigenvalue, its first eigenvector and whether it is
    repeated.'''
    vals, vecs = sla.eigh(symmetrize(mat))
    top = vals[-1]
    degenerate = vals.size > 1 and top - vals[-2] <= 1e-10 * max(1.0, abs(top))
    return float(top), vecs[:, -1], bool(degenerate)


def tight_level_zero_init(
    phi: SystemResponse,
    cost: CostSpec,
    O3: Matrix,
    W3: Matrix,
) -> float:
    '''
    The largest eigenvalue of ``W3^{-1/2} (Phi_w' C Phi_w - O3) W3^{-1/2}``,
    the exact level from the origin.

    :raises: :exc:`errors.ConditioningError` if ``W3`` is too
        ill-conditioned
    '''
    S = inv_sqrt(W3)
    CPhiw = cost.C_sqrt @ phi.Phi_w
    return _top_eig(S @ (CPhiw.T @ CPhiw - O3) @ S)[0]


def tight_level_adversarial(
    phi: SystemResponse,
    cost: CostSpec,
    O: BenchmarkOperator | Matrix,
    W: RegretWeight | Matrix,
) -> float:
    '''The exact level when the initial state is also adversarial.'''
    S = inv_sqrt(_weight_matrix(W))
    return _top_eig(S @ regret_matrix(phi, cost, O) @ S)[0]


class WorstCaseDisturbance(NamedTuple):
    w: DisturbanceSeq
    level: float
    degenerate: bool


def worst_case_disturbance_zero_init(
    phi: SystemResponse,
    cost: CostSpec,
    O3: Matrix,
    W3: Matrix,
) -> WorstCaseDisturbance:
    '''
    The disturbance ``w = W3^{-1/2} v`` from the top unit eigenvector
    ``v`` of the matrix in :func:`tight_level_zero_init`. Its regret to
    weight ratio equals the tight level.

    A repeated top eigenvalue has many maximisers; the first eigenvector
    of the decomposition is returned and `degenerate` is set.

    :returns: ``w`` with shape ``(T, p)``, the level and the flag
    '''
    S = inv_sqrt(W3)
    CPhiw = cost.C_sqrt @ phi.Phi_w
    level, v, degenerate = _top_eig(S @ (CPhiw.T @ CPhiw - O3) @ S)
    if degenerate:
        logger.debug("Top eigenvalue is repeated; the maximiser is not unique.")
    w = (S @ v).reshape(phi.horizon, phi.p)
    return WorstCaseDisturbance(w, level, degenerate)


def _trust_region_max(A: Matrix, b: Vector, c: float) -> float:
    '''
    ``max v' A v + 2 b' v + c`` over the unit ball, through its exact dual
    ``min c + lam + b' (lam I - A)^{-1} b`` over ``lam >= max(0, eig_max)``.
    '''
    vals, vecs = sla.eigh(symmetrize(A))
    beta = vecs.T @ b
    lo = max(0.0, vals[-1])
    hi = lo + np.linalg.norm(beta) + 1.0

    def dual(lam):
        gap = lam - vals
        with np.errstate(divide='ignore', invalid='ignore'):
            terms = np.where(beta == 0.0, 0.0, beta**2 / gap)
        if np.any(gap <= 0.0) and np.any(beta[gap <= 0.0] != 0.0):
            return np.inf
        return c + lam + terms.sum()

    # The dual is convex in lam and its minimiser lies below hi:
    res = minimize_scalar(
        dual, bounds=(lo, hi), method='bounded',
        options=dict(xatol=1e-12 * max(1.0, hi))
    )
    return float(min(res.fun, dual(lo), dual(hi)))


def _split(mat: Matrix, n: int):
    return mat[:n, :n], mat[n:, :n], mat[n:, n:]


def _bisect(feasible, lo: float, hi: float, tol: float) -> float:
    '''The smallest level in ``[lo, hi]`` at which `feasible` holds.'''
    if feasible(lo):
        return lo
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def single_ellipsoid_level(
    phi: SystemResponse,
    cost: CostSpec,
    O: BenchmarkOperator | Matrix,
    W: RegretWeight | Matrix,
    x0: Vector,
    P: Matrix,
    tol: float = 1e-9,
) -> float:
    '''
    The exact worst-case level over one step with ``w' P w <= 1``, found
    by bisection on ``mu`` with an exact trust-region maximum per step of
    the bisection.

    :raises: :exc:`errors.DimensionMismatchError` for horizons other
        than 1
    '''
    if phi.horizon != 1:
        raise DimensionMismatchError(
            f"A single ellipsoid covers horizon 1, not {phi.horizon}."
        )
    R = regret_matrix(phi, cost, O)
    Wm = _weight_matrix(W)
    S = inv_sqrt(np.asarray(P, dtype=float))
    x0 = np.asarray(x0, dtype=float).ravel()
    n = x0.size

    def feasible(mu):
        M11, M21, M22 = _split(R - mu * Wm, n)
        return _trust_region_max(
            S @ M22 @ S, S @ (M21 @ x0), float(x0 @ M11 @ x0)
        ) <= 0.0

    hi = max(tight_level_adversarial(phi, cost, O, Wm), 0.0)
    return _bisect(feasible, 0.0, hi, tol)


def energy_ball_violation(
    phi: SystemResponse,
    cost: CostSpec,
    O: BenchmarkOperator | Matrix,
    W: RegretWeight | Matrix,
    x0: Vector,
    omega: float,
    mu: float,
) -> float:
    '''
    The exact maximum of ``delta' (Phi' C Phi - O - mu W) delta`` over
    ``||w||^2 <= omega``. A certified level gives a value at most zero
    up to solver accuracy.
    '''
    M = regret_matrix(phi, cost, O) - mu * _weight_matrix(W)
    x0 = np.asarray(x0, dtype=float).ravel()
    M11, M21, M22 = _split(M, x0.size)
    r = np.sqrt(omega)
    return _trust_region_max(r * r * M22, r * (M21 @ x0), float(x0 @ M11 @ x0))


def polytopic_exact_level(
    phi: SystemResponse,
    cost: CostSpec,
    O: BenchmarkOperator | Matrix,
    W: RegretWeight | Matrix,
    x0: Vector,
    vertices: Matrix,
    tol: float = 1e-6,
    budget: int = VERTEX_BUDGET,
) -> float:
    '''
    The level over disturbance sequences whose every step is a vertex of
    a polytope, by bisection on ``mu`` over all vertex combinations.

    :param vertices: One vertex per row, shape ``(n_w, p)``

    :raises: :exc:`errors.CombinatorialBudgetError` when ``n_w^T``
        exceeds `budget`
    '''
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    T, p = phi.horizon, phi.p
    if vertices.shape[1] != p:
        raise DimensionMismatchError(
            f"Vertices of dimension {vertices.shape[1]}, expected {p}."
        )
    count = vertices.shape[0] ** T
    if count > budget:
        raise CombinatorialBudgetError(
            f"{vertices.shape[0]} vertices over {T} steps give {count}"
            f" sequences, more than the budget of {budget}."
        )
    x0 = np.asarray(x0, dtype=float).ravel()
    combos = np.array(list(itertools.product(range(len(vertices)), repeat=T)))
    w = vertices[combos].reshape(count, T * p)
    deltas = np.hstack((np.broadcast_to(x0, (count, x0.size)), w))
    R = regret_matrix(phi, cost, O)
    Wm = _weight_matrix(W)
    regret = np.einsum('ij,jk,ik->i', deltas, R, deltas)
    weight = np.einsum('ij,jk,ik->i', deltas, Wm, deltas)

    def feasible(mu):
        return np.max(regret - mu * weight) <= 0.0

    hi = max(tight_level_adversarial(phi, cost, O, Wm), 0.0)
    logger.debug(f"Bisecting over {count} vertex sequences.")
    return _bisect(feasible, 0.0, hi, tol)


def _scale_to_ellipsoids(w: Matrix, P_seq: Sequence[Matrix]) -> Matrix:
    '''Shrink every step onto ``w_k' P_k w_k <= 1`` if outside.'''
    out = w.copy()
    for k, P in enumerate(P_seq):
        size = out[k] @ P @ out[k]
        if size > 1.0:
            out[k] /= np.sqrt(size)
    return out


def _ratio(delta: Vector, R: Matrix, W: Matrix) -> float:
    den = delta @ W @ delta
    if den <= 1e-300:
        return -np.inf
    return float(delta @ R @ delta / den)


def local_level_lower_bound(
    phi: SystemResponse,
    cost: CostSpec,
    O: BenchmarkOperator | Matrix,
    W: RegretWeight | Matrix,
    x0: Vector,
    P: Matrix | Sequence[Matrix],
    restarts: int = ASCENT_RESTARTS,
    iters: int = ASCENT_ITERS,
    seed: int = 0,
) -> float:
    '''
    A lower bound on the worst-case regret ratio of `phi` over pointwise
    ellipsoids, from projected gradient ascent with restarts.

    Each iteration ascends ``delta' (R - rho W) delta`` at the current
    ratio ``rho`` with step ``1 / L``, ``L = 2 |R|`` for the regret matrix
    ``R = Phi' C Phi - O``, then scales every step back into its
    ellipsoid. Only improving steps are kept. Restarts begin on the
    ellipsoid boundaries in seeded random directions and along the
    zero-initial-state worst case. Every iterate is also tried scaled
    out to the boundary step by step.

    :returns: The best ratio found, at least zero
    '''
    R = regret_matrix(phi, cost, O)
    Wm = _weight_matrix(W)
    x0 = np.asarray(x0, dtype=float).ravel()
    n, p, T = x0.size, phi.p, phi.horizon
    model = PointwiseEllipsoid(P, x0)
    P_seq = model.P_seq(T)
    roots = [inv_sqrt(Pk) for Pk in P_seq]
    step = 1.0 / max(2.0 * np.linalg.norm(R, 2), 1e-300)
    rng = np.random.default_rng(seed)

    def to_boundary(w):
        out = w.copy()
        for k, Pk in enumerate(P_seq):
            size = out[k] @ Pk @ out[k]
            if size > 0.0:
                out[k] /= np.sqrt(size)
        return out

    def delta_of(w):
        return np.concatenate((x0, w.ravel()))

    starts = []
    if T > 0:
        O3 = _split(_benchmark_matrix(O), n)[2]
        W3 = _split(Wm, n)[2]
        eig_w = worst_case_disturbance_zero_init(phi, cost, O3, W3).w
        starts.append(to_boundary(eig_w))
    while len(starts) < restarts:
        v = rng.standard_normal((T, p))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        starts.append(np.array([root @ vk for root, vk in zip(roots, v)]))

    def move(w, rho, size):
        grad = 2.0 * ((R - rho * Wm) @ delta_of(w))[n:]
        w_new = _scale_to_ellipsoids(w + size * grad.reshape(T, p), P_seq)
        rho_new = _ratio(delta_of(w_new), R, Wm)
        edge = to_boundary(w_new)
        rho_edge = _ratio(delta_of(edge), R, Wm)
        if rho_edge > rho_new:
            return edge, rho_edge
        return w_new, rho_new

    best = 0.0
    for w in starts:
        rho = _ratio(delta_of(w), R, Wm)
        for _ in range(iters):
            rho = max(rho, 0.0)
            # Halve the step until the ratio improves.
            for halvings in range(ASCENT_HALVINGS + 1):
                w_new, rho_new = move(w, rho, step / 2**halvings)
                if rho_new > rho:
                    break
            improved = rho_new - rho
            if rho_new >= rho:
                w, rho = w_new, rho_new
            if improved <= 1e-12 * max(1.0, abs(rho)):
                break
        best = max(best, rho)
    return float(best)


def suboptimality_floor(W: RegretWeight | Matrix) -> float:
    '''
    ``2 / (pi kappa(W))``, the fraction of the pointwise upper bound the
    true worst case is guaranteed to reach.

    :raises: :exc:`errors.ConditioningError` when ``kappa(W)`` exceeds
        :obj:`constants.CONDITION_LIMIT`
    '''
    kappa = condition_number(_weight_matrix(W))
    if kappa > CONDITION_LIMIT:
        raise ConditioningError(f"Weight condition {kappa:.3g} is too large.")
    return 2.0 / (np.pi * kappa)


def sample_certificate(
    phi: SystemResponse,
    cost: CostSpec,
    O: BenchmarkOperator | Matrix,
    W: RegretWeight | Matrix,
    model: DisturbanceModel,
    mu: float,
    n_samples: int = 10_000,
    seed: int = 0,
) -> float:
    '''
    The largest ``delta' (Phi' C Phi - O - mu W) delta`` over disturbances
    sampled from `model`: inside the energy ball, inside every pointwise
    ellipsoid, from the unit sphere from the origin, or over the unit
    sphere in ``delta`` for an adversarial initial state. At most zero
    (up to solver accuracy) for a certified level.
    '''
    M = regret_matrix(phi, cost, O) - mu * _weight_matrix(W)
    n, p, T = phi.n, phi.p, phi.horizon
    rng = np.random.default_rng(seed)

    match model:
        case EnergyBall(omega=omega, x0=x0):
            w = np.array([
                sample_ball(rng, p * T, np.sqrt(omega))
                for _ in range(n_samples)
            ])
            deltas = np.hstack((np.broadcast_to(x0, (n_samples, n)), w))
        case PointwiseEllipsoid(x0=x0):
            P_seq = model.P_seq(T)
            roots = [inv_sqrt(Pk) for Pk in P_seq]
            w = np.array([
                np.concatenate([
                    sample_ellipsoid(rng, Pk, root)
                    for Pk, root in zip(P_seq, roots)
                ])
                for _ in range(n_samples)
            ]).reshape(n_samples, p * T)
            deltas = np.hstack((np.broadcast_to(x0, (n_samples, n)), w))
        case ZeroInit():
            w = rng.standard_normal((n_samples, p * T))
            w /= np.linalg.norm(w, axis=1, keepdims=True)
            deltas = np.hstack((np.zeros((n_samples, n)), w))
        case AdversarialInit():
            deltas = rng.standard_normal((n_samples, n + p * T))
            deltas /= np.linalg.norm(deltas, axis=1, keepdims=True)
    return float(np.max(np.einsum('ij,jk,ik->i', deltas, M, deltas)))


@dataclass(frozen=True)
class ChainReport:
    '''
    The ordering ``floor * mu_pwb <= mu_pwb <= mu_energy`` with the local
    lower estimate of the true pointwise worst case alongside.

    :param holds: Whether the asserted inequalities hold within `tol`
    :param soft_gap: ``max(0, floor * mu_pwb - lower_estimate)``, reported
        and never asserted
    '''
    mu_energy: float | None
    mu_pointwise: float | None
    floor: float
    lower_estimate: float | None
    omega: float
    tol: float
    statuses: dict[str, str] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        if self.mu_energy is None or self.mu_pointwise is None:
            return False
        return (
            self.floor * self.mu_pointwise <= self.mu_pointwise + self.tol
            and self.mu_pointwise <= self.mu_energy + self.tol
        )

    @property
    def soft_gap(self) -> float | None:
        if self.lower_estimate is None or self.mu_pointwise is None:
            return None
        return max(0.0, self.floor * self.mu_pointwise - self.lower_estimate)

    @property
    def reduction(self) -> float | None:
        '''Percentage by which the pointwise level undercuts the
        energy-ball level.'''
        if not self.mu_energy or self.mu_pointwise is None:
            return None
        return 100.0 * (1.0 - self.mu_pointwise / self.mu_energy)

    def lines(self) -> list[str]:
        fmt = lambda v: 'n/a' if v is None else f"{v:.6g}"
        return [
            f"energy-ball level (omega = {self.omega:.6g}): "
            + fmt(self.mu_energy),
            f"pointwise level: {fmt(self.mu_pointwise)}",
            f"floor 2/(pi kappa): {self.floor:.6g}",
            f"mu_pwb <= mu_energy: {fmt(self.mu_pointwise)}"
            f" <= {fmt(self.mu_energy)}",
            f"local lower estimate: {fmt(self.lower_estimate)}"
            f" (soft gap {fmt(self.soft_gap)})",
            f"chain holds: {self.holds}",
        ]


def check_inequality_chain(
    instance: Instance,
    weight: str = 'identity',
    constraints: bool = False,
    tol: float = 1e-6,
    restarts: int = ASCENT_RESTARTS,
) -> ChainReport:
    '''
    Solve the energy-ball program at the equivalent energy bound and the
    pointwise program for the same instance and weight, and check
    ``floor * mu_pwb <= mu_pwb <= mu_energy``.

    With `constraints`, both programs are tightened against the same
    pointwise set.

    :raises: :exc:`ValueError` if the instance has no pointwise model
    '''
    model = instance.pointwise
    if model is None:
        raise ValueError("The inequality chain needs a pointwise model.")
    sys, cost, O = instance.sys, instance.cost, instance.benchmark
    W = instance.regret_weight(weight)
    T = sys.horizon
    omega = model.equivalent_omega(T)
    spec = instance.constraints if constraints else None
    common = dict(settings=instance.settings, ops=instance.ops)

    energy = synth_energy_ball(
        sys, cost, O, W, model.x0, omega, spec, model, **common
    )
    pwb = synth_pointwise(sys, cost, O, W, model.x0, model.P, spec, **common)
    lower = None
    if pwb.ok:
        lower = local_level_lower_bound(
            pwb.phi, cost, O, W, model.x0, model.P, restarts=restarts
        )
    report = ChainReport(
        mu_energy=energy.mu,
        mu_pointwise=pwb.mu,
        floor=suboptimality_floor(W),
        lower_estimate=lower,
        omega=omega,
        tol=tol,
        statuses=dict(energy=energy.status, pointwise=pwb.status),
    )
    for line in report.lines():
        logger.info(line)
    return report
