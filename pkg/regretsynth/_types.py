__all__ = (
    'BackendName',
    'Delta',
    'DisturbanceSeq',
    'FamilyKind',
    'FileContents',
    'InputSeq',
    'JSONText',
    'Matrix',
    'ModelName',
    'Provenance',
    'SolverStatus',
    'StateSeq',
    'VariantName',
    'Vector',
    'WeightChoice',
)


from typing import Literal

import numpy as np
from numpy.typing import NDArray


type Matrix = NDArray[np.float64]
type Vector = NDArray[np.float64]

type Delta = Vector
'''The stacked initial state and disturbance sequence ``[x0; w]``.'''

type DisturbanceSeq = NDArray[np.float64]
'''A disturbance sequence with shape ``(T, p)``.'''

type StateSeq = NDArray[np.float64]
'''A state trajectory with shape ``(T + 1, n)``.'''

type InputSeq = NDArray[np.float64]
'''An input trajectory with shape ``(T + 1, m)``.'''

type FileContents = str
type JSONText = str

type VariantName = Literal[
    'h2',
    'hinf',
    'dr-energy',
    'cr-energy',
    'dr-pwb',
    'cr-pwb',
    'custom-weight',
]
'''Names of the controller variants the command line tool can synthesize.'''

type ModelName = Literal[
    'energy',
    'zero-init',
    'adversarial-init',
    'pointwise',
]

type WeightChoice = Literal['identity', 'benchmark'] | Matrix
'''A named weight or an explicit PD matrix over ``delta``.'''

type Provenance = Literal['identity', 'benchmark', 'custom']

type SolverStatus = Literal[
    'optimal',
    'near_optimal',
    'infeasible',
    'unbounded',
    'numerical_failure',
]

type BackendName = Literal['CLARABEL', 'SCS']

type FamilyKind = Literal[
    'truncated_gaussian',
    'uniform_ellipsoid',
    'constant',
    'sinusoidal',
    'sawtooth',
    'step',
    'stair',
]
