"""Classical Wright-Fisher building blocks.

Mutation parameter, Dirichlet and multinomial laws on the simplex, the
moment-duality function g, and the exact transition sampler (mixture of
posterior Dirichlets driven by the death-process total).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "Theta",
    "lambda_n",
    "as_simplex",
    "as_counts",
    "dirichlet_sample",
    "dirichlet_log_density",
    "multinomial_sample",
    "multinomial_log_pmf",
    "duality_g",
    "log_duality_g",
    "wf_transition_sample",
]


@dataclass(frozen=True)
class Theta:
    """Mutation parameter vector in (0, inf)^K, K >= 2."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) < 2:
            raise ConfigError("theta needs at least two components")
        if any(v <= 0 for v in self.values):
            raise ConfigError(f"theta components must be positive, got {self.values}")

    @classmethod
    def of(cls, *values: float) -> "Theta":
        return cls(tuple(float(v) for v in values))

    @classmethod
    def from_sequence(cls, seq: Sequence[float]) -> "Theta":
        return cls(tuple(float(v) for v in seq))

    @cached_property
    def total(self) -> float:
        return math.fsum(self.values)

    @property
    def dim(self) -> int:
        return len(self.values)

    @cached_property
    def as_array(self) -> np.ndarray:
        a = np.asarray(self.values, dtype=float)
        a.setflags(write=False)
        return a

    def mean(self) -> np.ndarray:
        """Mean of the stationary Dirichlet."""
        return self.as_array / self.total


def lambda_n(theta_total: float, n: int) -> float:
    """Death rate / eigenvalue index n: n (n + |theta| - 1) / 2."""
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    return 0.5 * n * (n + theta_total - 1.0)


def as_simplex(x: Sequence[float], dim: int | None = None) -> np.ndarray:
    """Validate and return a simplex point as a float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ConfigError("simplex point must be one-dimensional")
    if dim is not None and arr.size != dim:
        raise ConfigError(f"simplex point has dimension {arr.size}, expected {dim}")
    if np.any(arr < 0):
        raise ConfigError("simplex coordinates must be >= 0")
    if abs(float(arr.sum()) - 1.0) > 1e-12:
        raise ConfigError(f"simplex coordinates must sum to 1, got {arr.sum()!r}")
    return arr


def as_counts(m: Sequence[int], dim: int | None = None) -> np.ndarray:
    """Validate and return a nonnegative integer count vector."""
    arr = np.asarray(m)
    if arr.ndim != 1:
        raise ConfigError("count vector must be one-dimensional")
    if dim is not None and arr.size != dim:
        raise ConfigError(f"count vector has dimension {arr.size}, expected {dim}")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if np.any(np.abs(arr - rounded) > 0):
            raise ConfigError("count vector must be integer-valued")
        arr = rounded.astype(np.int64)
    else:
        arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ConfigError("counts must be >= 0")
    return arr


def dirichlet_sample(theta: Theta, rng: np.random.Generator) -> np.ndarray:
    """One Dirichlet(theta) draw via normalized gamma variates."""
    g = rng.gamma(theta.as_array)
    total = g.sum()
    while total == 0.0:  # pragma: no cover - tiny-shape underflow guard
        g = rng.gamma(theta.as_array)
        total = g.sum()
    return g / total


def dirichlet_log_density(theta: Theta, x: Sequence[float]) -> float:
    """Log density of Dirichlet(theta) at x, with signed-infinite boundaries.

    A zero coordinate gives -inf where theta_i > 1 (density vanishes) and
    +inf where theta_i < 1 (integrable blow-up); theta_i == 1 coordinates
    contribute nothing.
    """
    arr = as_simplex(x, theta.dim)
    log_norm = math.lgamma(theta.total) - math.fsum(
        math.lgamma(v) for v in theta.values
    )
    total = log_norm
    for ti, xi in zip(theta.values, arr):
        if xi == 0.0:
            if ti > 1.0:
                return -math.inf
            if ti < 1.0:
                return math.inf
        else:
            total += (ti - 1.0) * math.log(xi)
    return total


def multinomial_sample(n: int, x: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Multinomial(n, x) draw; exact at boundary x (zero categories stay zero)."""
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    arr = as_simplex(x)
    # rng.multinomial renormalizes internally; zero coordinates are honored
    return rng.multinomial(n, arr).astype(np.int64)


def multinomial_log_pmf(l: Sequence[int], n: int, x: Sequence[float]) -> float:
    """log pmf of Multinomial(n, x) at counts l; requires |l| = n."""
    counts = as_counts(l)
    arr = as_simplex(x, counts.size)
    if int(counts.sum()) != n:
        raise ConfigError(f"counts sum to {counts.sum()}, expected n={n}")
    total = math.lgamma(n + 1.0) - math.fsum(math.lgamma(c + 1.0) for c in counts)
    for c, xi in zip(counts, arr):
        if c > 0:
            if xi == 0.0:
                return -math.inf
            total += c * math.log(xi)
    return total


def log_duality_g(theta: Theta, x: Sequence[float], m: Sequence[int]) -> float:
    """log of the duality function g(x, m); -inf when g vanishes.

    g(x, m) = (|theta|)_{|m|} / prod_i (theta_i)_{m_i} * prod_i x_i^{m_i},
    the Radon-Nikodym derivative of Dirichlet(theta + m) against
    Dirichlet(theta).
    """
    counts = as_counts(m, theta.dim)
    arr = as_simplex(x, theta.dim)
    m_total = int(counts.sum())
    total = math.lgamma(theta.total + m_total) - math.lgamma(theta.total)
    for ti, ci, xi in zip(theta.values, counts, arr):
        total -= math.lgamma(ti + ci) - math.lgamma(ti)
        if ci > 0:
            if xi == 0.0:
                return -math.inf
            total += ci * math.log(xi)
    return total


def duality_g(theta: Theta, x: Sequence[float], m: Sequence[int]) -> float:
    """Duality function g(x, m); g(x, 0) = 1."""
    lv = log_duality_g(theta, x, m)
    return 0.0 if lv == -math.inf else math.exp(lv)


def wf_transition_sample(
    theta: Theta, x: Sequence[float], t: float, rng: np.random.Generator
) -> np.ndarray:
    """Exact draw from the classical WF transition kernel p_t(x, .).

    Draw the ancestral total M from the identity-clock dual started at
    infinity, thin into types with Multinomial(M, x), and return a
    Dirichlet(theta + L) draw.
    """
    if t <= 0:
        raise ConfigError(f"t must be > 0, got {t}")
    from .dual import DualWeightQuery, qtilde_sample  # deferred: dual builds on wf

    arr = as_simplex(x, theta.dim)
    from .clocks import identity_clock

    m_total = qtilde_sample(
        DualWeightQuery(theta_total=theta.total, clock=identity_clock(), t=t), rng
    )
    l = multinomial_sample(m_total, arr, rng)
    return dirichlet_sample(Theta.from_sequence(theta.as_array + l), rng)
