"""
Typed failures raised across the attack toolkit.

Every error derives from PixelAttackError so the CLI can report it uniformly;
value-type errors also derive from ValueError for callers that expect it.
"""
from __future__ import annotations


class PixelAttackError(Exception):
    """Base class for toolkit failures."""


class ShapeError(PixelAttackError, ValueError):
    def __init__(self, message: str, *, expected: object = None, got: object = None):
        self.expected = expected
        self.got = got
        if expected is not None or got is not None:
            message = f"{message} (expected {expected}, got {got})"
        super().__init__(message)


class ParameterError(PixelAttackError, ValueError):
    """A parameter lies outside its documented range."""


class BoundsError(PixelAttackError, ValueError):
    """Coordinate bounds do not satisfy lb <= 0 <= ub, lb < ub."""


class InputError(PixelAttackError, ValueError):
    """An image does not fit the oracle it is sent to."""


class ProtocolError(PixelAttackError):
    """An oracle answered with something that is not a probability vector."""
    def __init__(self, message: str, *, probs: object = None):
        self.probs = probs
        super().__init__(message)


class PreconditionError(PixelAttackError, ValueError):
    """An attack was started on an input it cannot accept."""


class FormatError(PixelAttackError, ValueError):
    """A binary or text file does not follow its format."""


class LengthError(FormatError):
    """A binary stream ends before its declared payload."""


class DegenerateStatsError(PixelAttackError, ValueError):
    """Normalization statistics with a zero standard deviation."""


class ExportError(PixelAttackError):
    """An image could not be written to disk."""


class ConfigError(PixelAttackError, ValueError):
    """An experiment configuration is malformed or references missing files."""
