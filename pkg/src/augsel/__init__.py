"""Synthetic-pool active learning for ordinal classification.

Selects generated samples to add to a small labeled set using entropy,
margin, k-center coreset or ordinal neighbour-margin acquisition, and
evaluates the result with quadratic weighted kappa.
"""

__version__ = "0.1.0"

from augsel.errors import CorruptionError, DomainError, FormatError, NumericError

__all__ = ["CorruptionError", "DomainError", "FormatError", "NumericError", "__version__"]
