"""
############
regretsynth
############

*Regret-optimal finite-horizon controllers from semidefinite programs.*

**regretsynth** synthesises causal state-feedback controllers for linear
time-varying systems that minimise dynamic regret or the competitive
ratio against the clairvoyant controller, under energy-bounded or
pointwise ellipsoidal disturbances, with H2 and H-infinity baselines,
independent verification oracles and a benchmark harness.


:license: MIT, see LICENSE for more details.
"""

__title__ = 'regretsynth'
__description__ = (
    "Regret-optimal finite-horizon controllers from semidefinite programs."
)
__version__ = '0.3.0'
__license__ = 'MIT'


__all__ = (
    'EXAMPLE_CONFIG',
    'Instance',
    'InstanceConfig',
    'SynthesisResult',
    'load_instance',
    'synthesize',
)


from os import PathLike

from .constants import EXAMPLE_CONFIG
from .config import InstanceConfig
from .synthesis import Instance, SynthesisResult, synthesize


def load_instance(file: PathLike = None) -> Instance:
    '''
    Build an :class:`Instance` from a config file, the shipped example
    instance by default.

    :param file: The config file to source,
        defaults to :obj:`EXAMPLE_CONFIG`
    :type file: :class:`PathLike`
    '''
    if file is None:
        file = EXAMPLE_CONFIG
    try:
        return InstanceConfig.from_file(file).to_instance()
    except FileNotFoundError as e:
        e.add_note(
            f"Try `python -m {__package__} example-config --out {file}`"
            " to write the example instance."
        )
        raise e from None


del PathLike
