__all__ = (
    'CONDITION_LIMIT',
    'CONFIG_FILE',
    'DEBUG',
    'DEFAULT_BACKEND',
    'DEFAULT_REALISATIONS',
    'DEFAULT_SEED',
    'EXAMPLE_CONFIG',
    'EXIT_CONFIG_ERROR',
    'EXIT_INFEASIBLE',
    'EXIT_OK',
    'EXIT_SOLVER_FAILURE',
    'EXIT_VERIFY_FAILED',
    'FAMILY_KINDS',
    'FEAS_TOL',
    'GAP_TOL',
    'MAX_ITERS',
    'SYMMETRY_TOL',
    'TABLE_VARIANTS',
    'TOL_PD',
    'TOL_PSD',
    'VARIANTS',
)


import os.path

from ._types import FamilyKind, VariantName


CONFIG_FILE: str = '~/.config/regretsynth/instance.conf'
'''The default instance config file path.'''

EXAMPLE_CONFIG: str = os.path.join(
    os.path.dirname(__file__), 'data', 'double_integrator.conf'
)
'''The canonical desk-scale instance shipped with the package.'''

DEBUG: bool = False
'''The default debug state.'''


# Matrix validation:
TOL_PSD: float = 1e-9
'''Smallest eigenvalue tolerated below zero for PSD cost matrices.'''

TOL_PD: float = 1e-12
'''Smallest eigenvalue required of PD matrices.'''

SYMMETRY_TOL: float = 1e-10
'''Largest asymmetry accepted before a matrix is rejected.'''

CONDITION_LIMIT: float = 1e12
'''Largest condition number accepted by inverse square roots.'''


# Solver defaults:
FEAS_TOL: float = 1e-8
GAP_TOL: float = 1e-8
MAX_ITERS: int = 1000
DEFAULT_BACKEND: str = 'CLARABEL'


# Benchmarking:
DEFAULT_SEED: int = 0
DEFAULT_REALISATIONS: int = 100

VARIANTS: tuple[VariantName, ...] = (
    'h2',
    'hinf',
    'dr-energy',
    'cr-energy',
    'dr-pwb',
    'cr-pwb',
    'custom-weight',
)

TABLE_VARIANTS: tuple[VariantName, ...] = VARIANTS[:6]
'''The controllers compared in benchmark tables, in column order.'''

FAMILY_KINDS: tuple[FamilyKind, ...] = (
    'truncated_gaussian',
    'uniform_ellipsoid',
    'constant',
    'sinusoidal',
    'sawtooth',
    'step',
    'stair',
)
'''Disturbance families in benchmark row order.
The position of a kind also seeds its random streams.'''


# Exit codes:
EXIT_OK: int = 0
EXIT_VERIFY_FAILED: int = 1
EXIT_INFEASIBLE: int = 2
EXIT_SOLVER_FAILURE: int = 3
EXIT_CONFIG_ERROR: int = 4
