__all__ = (
    'logger',
    'setup_logging',
)


import logging
from os import PathLike


LOG_FORMAT = '[{asctime}] ({levelname}:{name}) {message}'
DATE_FORMAT = '%Y-%m-%d_%H:%M:%S'

logger = logging.getLogger(__package__)


def setup_logging(
    level: int | str = logging.WARNING,
    file: PathLike | None = None,
) -> logging.Logger:
    '''
    Configure the root handler used by the command line tool.

    :param level: The logging level, defaults to ``WARNING``
    :type level: :class:`int` | :class:`str`

    :param file: Write records to this file instead of STDERR
    :type file: :class:`PathLike`, optional

    :returns: The package logger
    :rtype: :class:`logging.Logger`
    '''
    options = dict(
        level=level,
        datefmt=DATE_FORMAT,
        format=LOG_FORMAT,
        style='{',
        force=True,
    )
    if file is not None:
        options.update(filename=file, filemode='w')
    logging.basicConfig(**options)
    logger.setLevel(level)
    return logger
