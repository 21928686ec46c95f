'''Utility functions'''

__all__ = (
    'as_matrix',
    'condition_number',
    'inv_sqrt',
    'join_options',
    'make_error_message',
    'min_eig',
    'nested_update',
    'psd_sqrt',
    'scrub_comments',
    'str_to_bool',
    'symmetrize',
)


import numpy as np
import scipy.linalg as sla

from .constants import CONDITION_LIMIT, TOL_PSD
from .errors import ConditioningError, NotPositiveSemidefiniteError
from ._types import Matrix

from collections.abc import Iterable, Mapping
from typing import Any


def join_options(
    it: Iterable[object],
    /,
    final_sep: str = 'or',
    quote: bool = True,
) -> str:
    '''
    Join options into a phrase for error messages, such as
    ``'h2', 'hinf' or 'dr-pwb'``.

    :param it: The options to join
    :type it: :class:`Iterable[object]`

    :param final_sep: The word before the last option, defaults to ``'or'``
    :type final_sep: :class:`str`

    :param quote: Quote each option, defaults to ``True``
    :type quote: :class:`bool`
    '''
    opts = [repr(str(o)) if quote else str(o) for o in it]
    if len(opts) < 2:
        return ''.join(opts)
    return ', '.join(opts[:-1]) + f" {final_sep} " + opts[-1]


def str_to_bool(value: str | bool, /) -> bool:
    '''Read a config or command line switch such as ``on`` or ``no``.'''
    if isinstance(value, bool):
        return value
    word = str(value).lower()
    if word in ('true', 'yes', 'on', '1'):
        return True
    if word in ('false', 'no', 'off', '0'):
        return False
    raise ValueError(f"Invalid switch: {value!r}")


def scrub_comments(options: Any, /, prefix: str = '//') -> Any:
    '''
    Return a copy of config `options` without the keys and list entries
    that start with `prefix`.
    '''
    commented = lambda o: isinstance(o, str) and o.startswith(prefix)
    if isinstance(options, Mapping):
        return {
            k: scrub_comments(v, prefix)
            for k, v in options.items() if not commented(k)
        }
    if isinstance(options, list):
        return [scrub_comments(v, prefix) for v in options if not commented(v)]
    return options


def make_error_message(
    cls: type[Exception],
    doing_what: str,
    blame: Any,
    expected: str = None,
    file: str = None,
) -> Exception:
    '''
    Return an exception of type `cls` saying what went wrong while
    `doing_what`, and in which config `file`.
    '''
    lines = []
    indent = ""
    if file is not None:
        lines.append(f"In file {file!r}:")
        indent = "  "
    lines.append(f"{indent}While {doing_what}:")
    if expected is None:
        lines.append(f"{indent}  {blame}")
    else:
        lines.append(f"{indent}  Expected {expected}, but got {blame} instead.")
    return cls('\n' + '\n'.join(lines))


def nested_update(orig: dict, upd: Mapping) -> dict:
    '''
    Update the config sections of `orig` with those of `upd`, merging
    nested sections key by key. `orig` is modified and returned.
    '''
    for key, val in upd.items():
        if isinstance(val, Mapping) and isinstance(orig.get(key), dict):
            nested_update(orig[key], val)
        else:
            orig[key] = val
    return orig


def as_matrix(value: Any, name: str = 'matrix') -> Matrix:
    '''
    Convert nested sequences or scalars to a 2-D float array.

    :param value: The data to convert
    :param name: Used in error messages
    :type name: :class:`str`
    '''
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got {arr.ndim} axes")
    return arr


def symmetrize(mat: Matrix) -> Matrix:
    '''Return ``(M + M.T) / 2``.'''
    return 0.5 * (mat + mat.T)


def min_eig(mat: Matrix) -> float:
    '''The smallest eigenvalue of the symmetric part of `mat`.'''
    if mat.size == 0:
        return np.inf
    return float(sla.eigvalsh(symmetrize(mat))[0])


def condition_number(mat: Matrix) -> float:
    '''
    The ratio of extreme singular values of `mat`.
    Singular matrices have infinite condition.
    '''
    sv = sla.svdvals(mat)
    if sv[-1] <= 0.0:
        return np.inf
    return float(sv[0] / sv[-1])


def psd_sqrt(mat: Matrix, tol: float = TOL_PSD) -> Matrix:
    '''
    The symmetric square root of a PSD matrix.
    Eigenvalues within `tol` below zero are clamped to zero.

    :raises: :exc:`errors.NotPositiveSemidefiniteError` when an eigenvalue
        lies more than `tol` below zero
    '''
    vals, vecs = sla.eigh(symmetrize(mat))
    if vals.size and vals[0] < -tol:
        raise NotPositiveSemidefiniteError(
            f"Matrix has eigenvalue {vals[0]:.3g} below -{tol:g}"
        )
    vals = np.clip(vals, 0.0, None)
    return symmetrize((vecs * np.sqrt(vals)) @ vecs.T)


def inv_sqrt(mat: Matrix, limit: float = CONDITION_LIMIT) -> Matrix:
    '''
    The symmetric inverse square root of a PD matrix.

    :raises: :exc:`errors.ConditioningError` when the condition number
        exceeds `limit` or the matrix is not positive definite
    '''
    vals, vecs = sla.eigh(symmetrize(mat))
    if vals[0] <= 0.0 or vals[-1] / vals[0] > limit:
        raise ConditioningError(
            f"Matrix condition exceeds {limit:g}"
            f" (eigenvalues in [{vals[0]:.3g}, {vals[-1]:.3g}])"
        )
    return symmetrize((vecs / np.sqrt(vals)) @ vecs.T)
