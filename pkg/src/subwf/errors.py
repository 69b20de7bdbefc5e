"""Exception hierarchy shared across the package.

Three failure classes matter operationally: bad configuration (wrong
parameters, malformed inputs), numerical failure (a tolerance or iteration
cap that cannot be met), and I/O.  The CLI and the HTTP service map these
onto exit codes / status codes, so keep the split intact when raising.
"""

from __future__ import annotations


class SubwfError(Exception):
    """Base class for all package errors."""


class ConfigError(SubwfError, ValueError):
    """Invalid parameters, model specs or datasets."""


class NumericalError(SubwfError, ArithmeticError):
    """A numerical routine could not certify its result.

    Raised instead of silently degrading: tolerance not reachable,
    iteration caps exhausted, series nonconvergence, cancellation beyond
    what the working precision supports.
    """


class ToleranceError(NumericalError):
    """Requested tolerance cannot be certified."""


class NonConvergenceError(NumericalError):
    """A series or scan did not reach its convergence criterion in budget."""


class InadmissibleClockError(ConfigError):
    """Direct dual sampling requested for a clock that fails the drift /
    small-jump admissibility conditions."""


class RejectionExhaustedError(NumericalError):
    """Rejection sampler ran out of attempts; carries the attempt count so
    the caller can resume with a fresh budget."""

    def __init__(self, attempts: int, message: str | None = None):
        self.attempts = attempts
        super().__init__(message or f"rejection sampler exhausted {attempts} attempts")
