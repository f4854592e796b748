"""Exception types shared across the package.

The CLI maps these onto its exit-code categories, so raising the right
class matters more than the message text.
"""

from __future__ import annotations


class PpfaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(PpfaError):
    """Malformed or unreadable input data (CLI category: io)."""


class ConfigError(PpfaError):
    """Invalid configuration or incompatible dimensions (CLI category: config)."""


class NumericsError(PpfaError):
    """Numerical failure: rank deficiency, singular matrices, instability
    (CLI category: numeric)."""


class ConvergenceError(PpfaError):
    """Training could not produce a usable model (CLI category: convergence)."""
