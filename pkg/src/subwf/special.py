"""Numerically stable special-function kernel.

Log-gamma based rising/falling factorials, the Mittag-Leffler function
``E_a(-x)`` on the negative real axis, and the signed series coefficients
used by the dual-process weight expansions.  Coefficient magnitudes grow
like a high-degree polynomial of the series index and overflow doubles
quickly, so they are handled as (sign, log magnitude) pairs and combined
in linear space only at the final summation step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.integrate import quad

from .errors import ConfigError, NumericalError

_LOG_TINY = -745.0  # exp() underflows to 0 below this


@dataclass(frozen=True)
class SignedLog:
    """A real number stored as sign and natural log of absolute value.

    ``sign == 0`` means exactly zero; ``log_abs`` is then ignored.
    """

    sign: int
    log_abs: float = 0.0

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ConfigError(f"sign must be -1, 0 or +1, got {self.sign}")

    @classmethod
    def from_float(cls, value: float) -> "SignedLog":
        if value == 0.0:
            return cls(0)
        return cls(1 if value > 0 else -1, math.log(abs(value)))

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log_abs < _LOG_TINY:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    def __float__(self) -> float:  # pragma: no cover - convenience
        return self.to_float()

    def scaled(self, sign: int, log_factor: float) -> "SignedLog":
        """Multiply by ``sign * exp(log_factor)``."""
        if self.sign == 0 or sign == 0:
            return SignedLog(0)
        return SignedLog(self.sign * sign, self.log_abs + log_factor)


def sum_signed(terms: list[SignedLog]) -> tuple[float, float]:
    """Combine signed-log terms in linear space with exact rounding.

    All terms are rescaled by the largest magnitude before an ``fsum``
    combine, so the only precision loss is the representation error of the
    individual terms.  Returns ``(value, log_abs_sum)`` where the second
    entry is the log of the sum of absolute values; the caller uses it to
    bound cancellation error as ``exp(log_abs_sum) * n * eps``.
    """
    logs = [t.log_abs for t in terms if t.sign != 0]
    if not logs:
        return 0.0, -math.inf
    shift = max(logs)
    scaled = [t.sign * math.exp(t.log_abs - shift) for t in terms if t.sign != 0]
    total = math.fsum(scaled)
    abs_total = math.fsum(abs(s) for s in scaled)
    log_abs_sum = shift + (math.log(abs_total) if abs_total > 0 else -math.inf)
    if total == 0.0:
        return 0.0, log_abs_sum
    value = math.copysign(math.exp(shift + math.log(abs(total))), total)
    return value, log_abs_sum


def log_rising_factorial(a: float, n: int) -> float:
    """ln of the rising factorial (a)_n = Gamma(a+n)/Gamma(a).

    Supports n = -1 (needed by the series coefficients at j = 0), where
    (a)_{-1} = 1/(a-1) requires a > 1.
    """
    if a <= 0:
        raise ConfigError(f"rising factorial needs a > 0, got a={a}")
    if n < -1:
        raise ConfigError(f"rising factorial defined for n >= -1, got n={n}")
    if a + n <= 0:
        raise ConfigError(f"rising factorial needs a + n > 0, got a={a}, n={n}")
    if n == 0:
        return 0.0
    return math.lgamma(a + n) - math.lgamma(a)


def log_falling_factorial(a: float, x: int) -> float:
    """ln of a_[x] = Gamma(a+1)/Gamma(a-x+1); -inf when it vanishes.

    For integer a with x > a the product contains a zero factor.
    """
    if x < 0:
        raise ConfigError(f"falling factorial needs x >= 0, got {x}")
    if x == 0:
        return 0.0
    is_integer_a = abs(a - round(a)) < 1e-12
    if is_integer_a and x > round(a):
        return -math.inf
    if a - x + 1 <= 0:
        raise ConfigError(
            f"falling factorial undefined for a={a}, x={x} (a-x+1 <= 0, a not integer)"
        )
    return math.lgamma(a + 1.0) - math.lgamma(a - x + 1.0)


def falling_factorial(a: float, x: int) -> float:
    """a_[x] = Gamma(a+1)/Gamma(a-x+1); equals a(a-1)...(a-x+1) for integers."""
    lv = log_falling_factorial(a, x)
    return 0.0 if lv == -math.inf else math.exp(lv)


def coeff_a(j: int, m: int, theta_total: float) -> SignedLog:
    """Positive magnitude of the dual-series coefficient at indices (j, m).

    a_{j,m} = (2j + |theta| - 1) * (m + |theta|)_(j-1) / (m! (j-m)!),
    with the j = 0 case equal to 1 exactly (the (|theta|-1) prefactor and
    the (|theta|)_(-1) factor cancel).  The alternating sign (-1)^{j-m}
    belongs to the caller.
    """
    if theta_total <= 0:
        raise ConfigError(f"theta_total must be positive, got {theta_total}")
    if m < 0 or j < m:
        raise ConfigError(f"coefficient needs 0 <= m <= j, got j={j}, m={m}")
    if j == 0:
        return SignedLog(1, 0.0)
    log_val = (
        math.log(2.0 * j + theta_total - 1.0)
        + log_rising_factorial(m + theta_total, j - 1)
        - math.lgamma(m + 1.0)
        - math.lgamma(j - m + 1.0)
    )
    return SignedLog(1, log_val)


def coeff_a_cond(j: int, k: int, n: int, theta_total: float) -> SignedLog:
    """Conditional-start series coefficient a_{j,k}^{(|theta|, n)}.

    Equals a_{j,k} * n_[j] / (n + |theta|)_(j); the falling factorial
    truncates the series exactly at j = n, so the coefficient is zero for
    j > n.
    """
    if k < 0 or j < k:
        raise ConfigError(f"coefficient needs 0 <= k <= j, got j={j}, k={k}")
    if n < 0:
        raise ConfigError(f"starting total must be >= 0, got {n}")
    if j > n:
        return SignedLog(0)
    base = coeff_a(j, k, theta_total)
    log_damp = log_falling_factorial(float(n), j) - log_rising_factorial(
        n + theta_total, j
    )
    return base.scaled(1, log_damp)


def mittag_leffler_neg(alpha: float, x: float) -> float:
    """Mittag-Leffler function E_alpha(-x) for alpha in (0, 1], x >= 0.

    Power series for x <= 1; for larger x the completely monotone spectral
    representation is integrated by adaptive quadrature after removing the
    endpoint singularity:

        E_a(-x) = sin(a pi)/(a pi x) * int_0^inf exp(-u^(1/a))
                  / ((u/x)^2 + 2 (u/x) cos(a pi) + 1) du.

    Accuracy is ~1e-12 relative, comfortably inside the 1e-10 contract.
    """
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
    if x < 0:
        raise ConfigError(f"x must be >= 0, got {x}")
    if x == 0.0:
        return 1.0
    if alpha == 1.0:
        return math.exp(-x)
    if x <= 1.0:
        # Alternating power series sum_n (-x)^n / Gamma(alpha n + 1).
        total = 0.0
        term = 1.0
        n = 0
        parts = [1.0]
        while abs(term) > 1e-18:
            n += 1
            term = ((-1.0) ** n) * math.exp(
                n * math.log(x) - math.lgamma(alpha * n + 1.0)
            )
            parts.append(term)
            if n > 400:  # pragma: no cover - series converges long before
                raise NumericalError("Mittag-Leffler series failed to converge")
        total = math.fsum(parts)
        return total

    c = math.cos(alpha * math.pi)
    inv_x = 1.0 / x

    def integrand(u: float) -> float:
        s = u * inv_x
        return math.exp(-(u ** (1.0 / alpha))) / (s * s + 2.0 * c * s + 1.0)

    # exp(-u^(1/alpha)) < 1e-22 beyond this point
    u_tail = 50.0 ** alpha
    points = sorted({min(x, u_tail), min(1.0, u_tail)})
    val, err = quad(
        integrand, 0.0, u_tail, points=points, limit=400, epsabs=1e-14, epsrel=1e-12
    )
    pref = math.sin(alpha * math.pi) / (alpha * math.pi * x)
    result = pref * val
    if err * pref > 1e-9 * max(result, 1e-300):  # pragma: no cover - defensive
        raise NumericalError(
            f"Mittag-Leffler quadrature error {err * pref:.2e} too large at "
            f"alpha={alpha}, x={x}"
        )
    # Clamp representation noise; E_alpha(-x) lies in (0, 1].
    return min(max(result, 0.0), 1.0)
