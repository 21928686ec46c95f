'''
Instance config files in Scuff or JSON, and their conversion to
:class:`synthesis.Instance` objects.
'''

__all__ = (
    'InstanceConfig',
    'matrix_from_spec',
    'matrix_to_spec',
)


import json
import logging
import os
from copy import deepcopy

import numpy as np
import scuff
from scuff.tools import ScuffText

from . import utils
from .conic import SolverSettings
from .constants import CONFIG_FILE, EXAMPLE_CONFIG
from .errors import InvalidConfigError
from .namespaces import InstanceConfigSpec, MatrixSpec
from .operators import CostSpec, LTVSystem
from .synthesis import (
    AdversarialInit,
    ConstraintSpec,
    EnergyBall,
    Instance,
    PointwiseEllipsoid,
    ZeroInit,
)
from ._types import FileContents, JSONText, Matrix, ModelName

from collections.abc import Mapping, Sequence
from os import PathLike
from typing import Any, Self, get_args


logger = logging.getLogger(__name__)


MODELS: tuple[ModelName, ...] = get_args(ModelName.__value__)


def matrix_from_spec(value: Any, name: str = 'matrix') -> Matrix:
    '''
    Read a matrix given as nested row-major lists, a scalar, or a
    :class:`namespaces.MatrixSpec` with a declared shape and flat data.
    '''
    if isinstance(value, Mapping):
        try:
            shape = tuple(int(s) for s in value['shape'])
            data = np.asarray(value['data'], dtype=float).ravel()
        except (KeyError, TypeError) as e:
            raise ValueError(
                f"{name} needs 'shape' and 'data', got {sorted(value)}"
            ) from e
        if len(shape) != 2 or data.size != shape[0] * shape[1]:
            raise ValueError(
                f"{name} declares shape {shape} but has {data.size} entries"
            )
        return data.reshape(shape)
    return utils.as_matrix(value, name)


def matrix_to_spec(mat: Matrix) -> MatrixSpec:
    '''The dense form of `mat` written to result files.'''
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    return MatrixSpec(shape=list(mat.shape), data=mat.ravel().tolist())


def _is_matrix_sequence(value: Any) -> bool:
    '''Whether `value` lists several matrices rather than one matrix's rows.'''
    if isinstance(value, Mapping) or not isinstance(value, Sequence):
        return False
    return bool(value) and (
        isinstance(value[0], Mapping)
        or np.ndim(value[0]) == 2
    )


class InstanceConfig(dict):
    '''
    Build and transport instance configs between files, dicts and
    :class:`synthesis.Instance` objects.

    :param options: Optional :class:`namespaces.InstanceConfigSpec`
        parameters that override those of `defaults`
    :type options: :class:`namespaces.InstanceConfigSpec`

    :param defaults: Parameters to use by default,
        defaults to :attr:`InstanceConfig._default_params`
    :type defaults: :class:`Mapping`
    '''
    _default_params: InstanceConfigSpec = {
        'weight': 'identity',
        'constrained_benchmark': False,
        'solver': {'backend': 'CLARABEL'},
    }

    def __init__(
        self,
        options: InstanceConfigSpec = {},
        defaults: InstanceConfigSpec = None,
    ) -> None:
        if defaults is None:
            defaults = self._default_params
        self.defaults = deepcopy(defaults)
        self.options = utils.scrub_comments(deepcopy(options))

        self.update(utils.nested_update(deepcopy(self.defaults), self.options))
        self.file = None
        self.file_contents = None

    def __repr__(self) -> str:
        cls = type(self).__name__
        file = self.file
        maybe_file = f"{file=}, " if file else ""
        return f"<{cls} {maybe_file}{dict(self)}>"

    @classmethod
    def from_file(
        cls,
        file: PathLike = None,
        *,
        defaults: InstanceConfigSpec = None,
        overrides: InstanceConfigSpec = {},
    ) -> Self:
        '''
        Return a new :class:`InstanceConfig` from a config file path.
        Files ending in ``.json`` are read as JSON, others as Scuff.

        :param file: The filepath to the config file,
            defaults to :obj:`constants.CONFIG_FILE`
        :type file: :class:`PathLike`

        :param defaults: The base parameters the file overrides
        :type defaults: :class:`namespaces.InstanceConfigSpec`

        :param overrides: Additional param overrides to the config file
        :type overrides: :class:`namespaces.InstanceConfigSpec`

        :returns: A new :class:`InstanceConfig` instance
        :rtype: :class:`InstanceConfig`
        :raises: :exc:`OSError` for issues with accessing the file
        :raises: :exc:`errors.InvalidConfigError` if the file cannot be
            parsed
        '''
        if file is None:
            file = CONFIG_FILE
        absolute = os.path.abspath(os.path.expanduser(file))
        is_json = (os.path.splitext(absolute)[1] == '.json')
        reader = (cls._read_file, cls._read_json)[is_json]
        try:
            from_file, text = reader(absolute)
        except OSError as e:
            raise e.with_traceback(None)
        except Exception as e:
            raise utils.make_error_message(
                InvalidConfigError,
                doing_what="parsing the config file",
                blame=f"{type(e).__name__}: {e}",
                file=str(file),
            ) from e

        if not isinstance(from_file, Mapping):
            raise utils.make_error_message(
                InvalidConfigError,
                doing_what="parsing the config file",
                blame=type(from_file).__name__,
                expected="a mapping of options",
                file=str(file),
            )
        options = utils.nested_update(dict(from_file), deepcopy(overrides))
        config = cls(options, defaults)
        config.file = str(file)
        config.file_contents = text
        logger.debug(f"Read config {file!r}")
        return config

    @classmethod
    def example(cls) -> Self:
        '''The canonical desk-scale instance shipped with the package.'''
        return cls.from_file(EXAMPLE_CONFIG)

    @staticmethod
    def _read_file(file: PathLike) -> tuple[InstanceConfigSpec, FileContents]:
        p = scuff.FileParser(file=file)
        data = p.to_py()
        return data, p._string

    @staticmethod
    def _read_json(file: PathLike) -> tuple[InstanceConfigSpec, JSONText]:
        with open(file, 'r') as f:
            text = f.read()
        return json.loads(text), text

    def write(self, file: PathLike, indent: int = 4) -> None:
        '''
        Write the config to `file`, as JSON if it ends in ``.json`` and as
        Scuff otherwise.

        :param file: The file to write to
        :type file: :class:`PathLike`

        :param indent: How many spaces to indent JSON by, defaults to ``4``
        :type indent: :class:`int`
        '''
        absolute = os.path.abspath(os.path.expanduser(file))
        os.makedirs(os.path.dirname(absolute), exist_ok=True)
        is_json = (os.path.splitext(absolute)[1] == '.json')
        text = self.as_json(indent) if is_json else self.as_scuff()
        with open(absolute, 'w') as f:
            f.write(text + '\n')
        logger.info(f"Wrote config file to {file!r}")

    def as_scuff(self) -> ScuffText:
        '''
        Return the config as a string with Scuff formatting.
        '''
        return scuff.PyParser().to_scuff(dict(self))

    def as_json(self, indent: int = 4) -> JSONText:
        '''
        Return the config as a string with JSON formatting.

        :param indent: How many spaces to indent by, defaults to ``4``
        :type indent: :class:`int`
        '''
        return json.dumps(self, indent=indent)

    def _fail(
        self,
        doing_what: str,
        blame: Any,
        expected: str = None,
    ) -> InvalidConfigError:
        return utils.make_error_message(
            InvalidConfigError,
            doing_what=doing_what,
            blame=blame,
            expected=expected,
            file=self.file,
        )

    def _section(self, key: str, required: bool = True) -> Mapping:
        section = self.get(key)
        if section is None and not required:
            return {}
        if not isinstance(section, Mapping):
            raise self._fail(
                f"reading {key!r}", repr(section), f"a mapping for {key!r}"
            )
        return section

    def _matrix(self, value: Any, where: str) -> Matrix:
        try:
            return matrix_from_spec(value, where)
        except (TypeError, ValueError) as e:
            raise self._fail(f"reading {where}", str(e)) from e

    def _sequence(
        self,
        section: Mapping,
        key: str,
        horizon: int,
        length: int,
        where: str,
        default: Matrix | None = None,
    ) -> list[Matrix]:
        '''One matrix per step, from ``key`` repeated or ``key_seq``.'''
        seq_key = f"{key}_seq"
        if seq_key in section:
            raw = section[seq_key]
            if not isinstance(raw, Sequence) or len(raw) != length:
                raise self._fail(
                    f"reading {where}.{seq_key}",
                    f"{len(raw) if isinstance(raw, Sequence) else raw!r}",
                    f"a list of {length} matrices for horizon {horizon}"
                )
            return [
                self._matrix(m, f"{where}.{seq_key}[{k}]")
                for k, m in enumerate(raw)
            ]
        if key in section:
            return [self._matrix(section[key], f"{where}.{key}")] * length
        if default is not None:
            return [default] * length
        raise self._fail(
            f"reading {where!r}", f"no {key!r} or {seq_key!r}",
        )

    def _horizon(self) -> int:
        horizon = self.get('horizon')
        if (
            isinstance(horizon, bool)
            or not isinstance(horizon, (int, float))
            or horizon != int(horizon)
            or horizon < 1
        ):
            raise self._fail(
                "reading 'horizon'", repr(horizon), "a positive integer"
            )
        return int(horizon)

    def _system(self, horizon: int) -> LTVSystem:
        section = self._section('system')
        A_seq = self._sequence(section, 'A', horizon, horizon + 1, 'system')
        B_seq = self._sequence(section, 'B', horizon, horizon + 1, 'system')
        n = A_seq[0].shape[0]
        E_seq = self._sequence(
            section, 'E', horizon, horizon, 'system', default=np.eye(n)
        )
        return LTVSystem(A_seq, B_seq, E_seq)

    def _cost(self, horizon: int) -> CostSpec:
        section = self._section('cost')
        Q_seq = self._sequence(section, 'Q', horizon, horizon + 1, 'cost')
        R_seq = self._sequence(section, 'R', horizon, horizon + 1, 'cost')
        return CostSpec(Q_seq, R_seq)

    def _model(self, sys: LTVSystem):
        section = self._section('disturbance')
        model = section.get('model')
        if model not in MODELS:
            raise self._fail(
                "reading 'disturbance.model'",
                repr(model),
                utils.join_options(MODELS),
            )
        x0 = np.asarray(section.get('x0', np.zeros(sys.n)), dtype=float)
        match model:
            case 'energy':
                if 'omega' not in section:
                    raise self._fail(
                        "reading 'disturbance'",
                        "no 'omega' for an energy model",
                    )
                return EnergyBall(section['omega'], x0)
            case 'pointwise':
                if 'P' not in section:
                    raise self._fail(
                        "reading 'disturbance'",
                        "no 'P' for a pointwise model",
                    )
                raw = section['P']
                if _is_matrix_sequence(raw):
                    P = tuple(
                        self._matrix(m, f"disturbance.P[{k}]")
                        for k, m in enumerate(raw)
                    )
                else:
                    P = self._matrix(raw, "disturbance.P")
                return PointwiseEllipsoid(P, x0)
            case 'zero-init':
                return ZeroInit()
            case 'adversarial-init':
                return AdversarialInit()

    def _constraints(self, sys: LTVSystem) -> ConstraintSpec | None:
        section = self._section('constraints', required=False)
        if not section:
            return None
        rows = ConstraintSpec.from_bounds(
            sys.n, sys.m,
            section.get('state_bounds'),
            section.get('input_bounds'),
        )
        H_x, H_u = [rows.H_x], [rows.H_u]
        if 'H_x' in section:
            H_x.insert(0, self._matrix(section['H_x'], "constraints.H_x"))
        if 'H_u' in section:
            H_u.insert(0, self._matrix(section['H_u'], "constraints.H_u"))
        return ConstraintSpec(np.vstack(H_x), np.vstack(H_u))

    def _weight(self):
        weight = self.get('weight', 'identity')
        if isinstance(weight, str):
            return weight
        return self._matrix(weight, 'weight')

    def _settings(self) -> SolverSettings:
        section = self._section('solver', required=False)
        options = {}
        if 'backend' in section:
            options['backend'] = str(section['backend']).upper()
        if 'tol' in section:
            options['feas_tol'] = options['gap_tol'] = float(section['tol'])
        if 'max_iters' in section:
            options['max_iters'] = int(section['max_iters'])
        if 'verbose' in section:
            options['verbose'] = utils.str_to_bool(section['verbose'])
        return SolverSettings(**options)

    def to_instance(self) -> Instance:
        '''
        Build the :class:`synthesis.Instance` this config describes.

        :raises: :exc:`errors.InvalidConfigError` for any missing,
            malformed or invalid entry; validation messages from the
            model classes (naming offending time indices) are kept
        '''
        try:
            horizon = self._horizon()
            sys = self._system(horizon)
            cost = self._cost(horizon)
            model = self._model(sys)
            omega = None
            if isinstance(model, PointwiseEllipsoid):
                omega = self['disturbance'].get('omega')
            instance = Instance(
                sys=sys,
                cost=cost,
                model=model,
                constraints=self._constraints(sys),
                weight=self._weight(),
                omega=omega,
                constrained_benchmark=utils.str_to_bool(
                    self.get('constrained_benchmark', False)
                ),
                settings=self._settings(),
            )
        except InvalidConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise self._fail(
                "building the instance", f"{type(e).__name__}: {e}"
            ) from e
        logger.debug(
            f"Instance with (n, m, p, T) = {sys.dims} and model"
            f" {type(model).__name__}"
        )
        return instance
