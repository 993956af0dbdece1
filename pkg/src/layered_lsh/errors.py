"""Error taxonomy shared across the package.

The CLI maps these onto process exit codes: parameter errors exit 2,
I/O and format errors exit 3, integrity errors exit 4.
"""

from __future__ import annotations


class ParameterError(ValueError):
    """A parameter is out of its documented domain."""


class DimensionError(ParameterError):
    """A vector or matrix does not have the expected shape."""


class FormatError(ValueError):
    """A file does not conform to the documented binary layout.

    Attributes:
        offset: byte offset at which the problem was detected.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class IntegrityError(RuntimeError):
    """An internal consistency check failed (indicates a routing bug)."""
