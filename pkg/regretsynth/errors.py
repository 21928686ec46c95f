__all__ = (
    'AsymmetricCoefficientError',
    'CausalityError',
    'CLIFatalError',
    'CLIUsageError',
    'CombinatorialBudgetError',
    'ConditioningError',
    'DimensionMismatchError',
    'InfeasibleBenchmarkError',
    'InvalidConfigError',
    'InvalidParameterError',
    'NotPositiveSemidefiniteError',
    'NumericError',
    'ProgramSealedError',
    'RankDeficientError',
    'SingularResponseError',
)


from .constants import EXIT_CONFIG_ERROR


class DimensionMismatchError(ValueError):
    '''
    Raised when matrix shapes or sequence lengths are inconsistent.
    '''
    pass

class NotPositiveSemidefiniteError(ValueError):
    '''
    Raised when a matrix required to be positive (semi)definite is not.

    :param msg: The error message
    :type msg: :class:`str`

    :param index: The time index of the offending matrix, if any
    :type index: :class:`int`, optional
    '''
    def __init__(self, msg: str, index: int | None = None) -> None:
        super().__init__(msg)
        self.index = index

class RankDeficientError(ValueError):
    '''
    Raised when a disturbance matrix ``E_k`` lacks full row rank.
    '''
    def __init__(self, msg: str, index: int | None = None) -> None:
        super().__init__(msg)
        self.index = index

class ConditioningError(ValueError):
    '''
    Raised when a matrix is too ill-conditioned to invert its square root.
    '''
    pass

class CausalityError(ValueError):
    '''
    Raised when a matrix claimed to be causal has nonzero blocks above
    its block diagonal.
    '''
    pass

class SingularResponseError(ArithmeticError):
    '''
    Raised by :func:`slp.recover_controller` when a diagonal block of the
    state response is rank deficient.
    '''
    pass

class NumericError(ArithmeticError):
    '''
    Raised when an internal linear solve fails.
    '''
    pass

class InfeasibleBenchmarkError(RuntimeError):
    '''
    Raised when the constrained non-causal benchmark program has no
    solution.

    :param msg: The error message
    :type msg: :class:`str`

    :param status: The solver status
    :type status: :class:`str`
    '''
    def __init__(self, msg: str, status: str) -> None:
        super().__init__(msg)
        self.status = status

class AsymmetricCoefficientError(ValueError):
    '''
    Raised when an LMI is given coefficient matrices that are not symmetric.
    '''
    pass

class ProgramSealedError(RuntimeError):
    '''
    Raised when constraints are added to a sealed :class:`conic.ConicProgram`.
    '''
    pass

class CombinatorialBudgetError(ValueError):
    '''
    Raised when vertex enumeration would exceed its evaluation budget.
    '''
    pass

class InvalidParameterError(ValueError):
    '''
    Raised when a disturbance family receives invalid parameters.
    '''
    pass

class InvalidConfigError(ValueError):
    '''
    Raised when an instance config file cannot be turned into an instance.
    '''
    pass


class CLIFatalError(Exception):
    '''
    Base class for errors that cause the CLI program to exit.

    :param msg: The error message to issue when exiting
    :type msg: :class:`str`

    :param exit_code: The process exit code, defaults to
        :obj:`constants.EXIT_CONFIG_ERROR`
    :type exit_code: :class:`int`
    '''
    def __init__(self, msg: str, exit_code: int = EXIT_CONFIG_ERROR) -> None:
        super().__init__()
        self.msg = msg
        self.exit_code = exit_code

    def __str__(self):
        return self.msg


class CLIUsageError(CLIFatalError):
    '''
    Raised when the CLI program is used incorrectly.
    '''
    pass
