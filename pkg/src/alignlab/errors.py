"""Exception hierarchy shared across the package.

The CLI maps :class:`UsageError` to exit code 1 and :class:`FormatError` to
exit code 2.
"""


class AlignLabError(Exception):
    pass


class UsageError(AlignLabError):
    """Bad arguments, out-of-range layers, incompatible models."""


class FormatError(AlignLabError):
    """Malformed input files (talp, corpora, checkpoints, configs)."""


class DimensionError(UsageError, ValueError):
    """Shape mismatch between tensors."""


class NonFiniteError(AlignLabError, ArithmeticError):
    """An op produced NaN or Inf."""
