"""Error taxonomy shared by every module.

InputError: the caller handed us something malformed (bad shapes, bad
flags, out-of-domain values). Maps to CLI exit code 2.

NumericError: inputs were well formed but the computation degenerated
(non-finite intermediates, failed eigendecomposition). Maps to CLI exit
code 1.
"""
from __future__ import annotations


class InputError(ValueError):
    """Malformed or out-of-domain input."""


class NumericError(ArithmeticError):
    """Numerically degenerate computation on well-formed input."""
