__all__ = (
    'ConstraintConfigSpec',
    'CostConfigSpec',
    'DisturbanceConfigSpec',
    'InstanceConfigSpec',
    'MatrixSpec',
    'SolverConfigSpec',
    'SynthesisResultSpec',
    'SystemConfigSpec',
    'VerifyReportSpec',
    '_CmdOptionSpec',
)


from os import PathLike

from ._types import ModelName, SolverStatus, VariantName

from collections.abc import Sequence
from typing import Required, TypedDict


type NestedRows = Sequence[Sequence[float]]


class MatrixSpec(TypedDict):
    '''
    A matrix with a declared shape and flat row-major data, the dense
    form used in config and result files.
    '''
    shape: Sequence[int]
    data: Sequence[float]


type MatrixLike = NestedRows | MatrixSpec | float


class SystemConfigSpec(TypedDict, total=False):
    '''
    Dynamics either repeated over the horizon (`A`, `B`, `E`) or given
    per step (`A_seq` and `B_seq` of length ``T + 1``, `E_seq` of
    length ``T``).
    '''
    A: MatrixLike
    B: MatrixLike
    E: MatrixLike
    A_seq: Sequence[MatrixLike]
    B_seq: Sequence[MatrixLike]
    E_seq: Sequence[MatrixLike]


class CostConfigSpec(TypedDict, total=False):
    Q: MatrixLike
    R: MatrixLike
    Q_seq: Sequence[MatrixLike]
    R_seq: Sequence[MatrixLike]


class DisturbanceConfigSpec(TypedDict, total=False):
    '''
    The disturbance model. `omega` bounds the energy of ``'energy'``
    models; `P` (one matrix or one per step) shapes ``'pointwise'``
    ellipsoids.
    '''
    model: Required[ModelName]
    x0: Sequence[float]
    omega: float
    P: MatrixLike | Sequence[MatrixLike]


class ConstraintConfigSpec(TypedDict, total=False):
    '''
    Polytopic state and input sets ``H_x x <= 1`` and ``H_u u <= 1``.
    Box bounds expand to rows of ``+-1/bound``.
    '''
    H_x: MatrixLike
    H_u: MatrixLike
    state_bounds: Sequence[float]
    input_bounds: Sequence[float]


class SolverConfigSpec(TypedDict, total=False):
    backend: str
    tol: float
    max_iters: int
    verbose: bool


class InstanceConfigSpec(TypedDict, total=False):
    '''
    A dict specifying the structure of instance config files.
    '''
    horizon: Required[int]
    system: Required[SystemConfigSpec]
    cost: Required[CostConfigSpec]
    disturbance: Required[DisturbanceConfigSpec]
    weight: str | MatrixLike
    constraints: ConstraintConfigSpec
    constrained_benchmark: bool
    solver: SolverConfigSpec


class SynthesisResultSpec(TypedDict, total=False):
    '''
    The structure of result files written by ``synthesize``.
    Matrices are stored dense with their shapes.
    '''
    variant: Required[VariantName]
    status: Required[SolverStatus]
    mu: float | None
    competitive_ratio: float | None
    lambdas: Sequence[float]
    weight: str | None
    constraints: bool
    residuals: dict[str, float]
    solve_time: float
    iterations: int | None
    diagnostics: dict
    dims: dict[str, int]
    Phi_x: MatrixSpec
    Phi_u: MatrixSpec
    K: MatrixSpec


class VerifyReportSpec(TypedDict, total=False):
    '''
    The structure of report files written by ``verify``.
    '''
    variant: VariantName
    passed: Required[bool]
    checks: Required[dict[str, bool]]
    achievability_residual: float
    response_mismatch: float
    regret_psd_margin: float
    certificate_excess: float
    tight_level: float | None
    energy_ball_violation: float | None
    chain: dict | None
    lines: Sequence[str]


class _CmdOptionSpec(TypedDict, total=False):
    '''
    Command line options that control what the command does rather
    than describing the instance.
    '''
    command: Required[str]
    config_file: PathLike
    variant: VariantName
    constraints: bool
    seed: int
    out: PathLike
    solver_tol: float
    realisations: int
    controllers: Sequence[str]
    results: Sequence[PathLike]
    debug: bool
    log_file: PathLike
