"""
Odds and ends shared by the pipeline stages: the logger helper, the error classes
and the file digest used by the run manifest.
"""

__all__ = ['get_log', 'ProsodyError', 'ProsodyInputError', 'ConfigError', 'CannotBootstrap',
           'DegenerateSamples', 'file_digest']

import hashlib
import logging
from pathlib import Path
from typing import Optional, Union


def get_log(level: int = logging.INFO) -> logging.Logger:
    """
    Root logger with a single stream handler. Calling it again only changes the level.
    """
    log = logging.getLogger()
    if len(log.handlers) > 0:
        log.setLevel(level)
        return log
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    log.addHandler(handler)
    log.setLevel(level)
    handler.setLevel(level)
    return log


class ProsodyError(ValueError):
    """
    Base class of the errors raised by ``prosodic_entrainment``.
    """


class ProsodyInputError(ProsodyError):
    """
    Bad input: a missing tier, a malformed row, an empty track...
    The string form names the file, field and line when they are known.

    :param message: what went wrong, e.g. ``'label outside inventory'``
    :param filename: offending file
    :param field: offending column / field
    :param line: 1-based line number in ``filename``
    """

    def __init__(self, message: str,
                 filename: Optional[Union[str, Path]] = None,
                 field: Optional[str] = None,
                 line: Optional[int] = None):
        self.message = message
        self.filename = str(filename) if filename is not None else None
        self.field = field
        self.line = line
        super().__init__(str(self))

    def __str__(self) -> str:
        where = []
        if self.filename is not None:
            where.append(f'file {self.filename}')
        if self.line is not None:
            where.append(f'line {self.line}')
        if self.field is not None:
            where.append(f'field {self.field}')
        return f'{self.message} ({", ".join(where)})' if where else self.message


class ConfigError(ProsodyError):
    """
    Unknown key, wrong type or unreadable configuration file.
    """


class CannotBootstrap(ProsodyError):
    """
    The centroid classifier has no positive or no negative initial representatives.
    """


class DegenerateSamples(ProsodyError):
    """
    Zero-variance samples with different means: the t statistic is undefined.
    """


def file_digest(path: Union[str, Path]) -> str:
    """
    sha256 hex digest of a file, read in 1 MB blocks.
    """
    sha = hashlib.sha256()
    with open(path, 'rb') as fh:
        for block in iter(lambda: fh.read(1 << 20), b''):
            sha.update(block)
    return sha.hexdigest()
