"""Finite mixtures of Dirichlet distributions: the closed filter family.

A mixture is a base mutation parameter theta plus finitely many count
vectors m with weights; component m stands for Dirichlet(theta + m).
Update and prediction steps map this family to itself, so it is the state
carried through filtering and smoothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, NumericalError
from .wf import Theta, as_counts, dirichlet_sample

__all__ = ["DirichletMixture"]

_WEIGHT_PRUNE_EPS = 1e-12


@dataclass
class DirichletMixture:
    theta: Theta
    components: dict[tuple[int, ...], float]

    def __post_init__(self):
        if not self.components:
            raise ConfigError("mixture needs at least one component")
        for key in self.components:
            if len(key) != self.theta.dim:
                raise ConfigError(
                    f"component {key} has dimension {len(key)}, "
                    f"expected {self.theta.dim}"
                )
            if any(k < 0 for k in key):
                raise ConfigError(f"component {key} has negative counts")

    @classmethod
    def point(cls, theta: Theta, m: Iterable[int] | None = None) -> "DirichletMixture":
        key = tuple(int(v) for v in (m if m is not None else [0] * theta.dim))
        return cls(theta, {key: 1.0})

    @classmethod
    def from_weights(
        cls, theta: Theta, weights: Mapping[tuple[int, ...], float]
    ) -> "DirichletMixture":
        return cls(theta, dict(weights)).normalized()

    def total_mass(self) -> float:
        return math.fsum(self.components.values())

    def normalized(self) -> "DirichletMixture":
        total = self.total_mass()
        if not total > 0:
            raise NumericalError("mixture has no positive mass to normalize")
        return DirichletMixture(
            self.theta, {k: w / total for k, w in self.components.items()}
        )

    def pruned(self, eps: float = _WEIGHT_PRUNE_EPS) -> "DirichletMixture":
        """Drop weights below eps (cancellation noise) and renormalize.

        Weights below -eps are clamped to zero; anything more negative is a
        numerical failure upstream and raises.
        """
        kept: dict[tuple[int, ...], float] = {}
        for k, w in self.components.items():
            if w < -1e-8:
                raise NumericalError(f"mixture weight {w:.3e} at {k} is negative")
            if w >= eps:
                kept[k] = w
        if not kept:
            # keep the single largest component rather than an empty mixture
            k = max(self.components, key=lambda key: self.components[key])
            kept = {k: 1.0}
        return DirichletMixture(self.theta, kept).normalized()

    def validate(self, tol: float = 1e-10):
        total = self.total_mass()
        if abs(total - 1.0) > tol:
            raise NumericalError(f"mixture weights sum to {total!r}, not 1")
        if any(w < -tol for w in self.components.values()):
            raise NumericalError("mixture has a negative weight")

    def mean(self) -> np.ndarray:
        """Posterior mean: sum_m w_m (theta + m) / (|theta| + |m|)."""
        acc = np.zeros(self.theta.dim)
        th = self.theta.as_array
        th_tot = self.theta.total
        for k, w in self.components.items():
            kv = np.asarray(k, dtype=float)
            acc += w * (th + kv) / (th_tot + kv.sum())
        return acc

    def max_total(self) -> int:
        return max(sum(k) for k in self.components)

    def support_size(self) -> int:
        return len(self.components)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        keys = list(self.components)
        weights = np.array([self.components[k] for k in keys])
        weights = weights / weights.sum()
        idx = int(rng.choice(len(keys), p=weights))
        m = as_counts(keys[idx], self.theta.dim)
        return dirichlet_sample(Theta.from_sequence(self.theta.as_array + m), rng)

    def as_rows(self) -> list[dict]:
        """JSON-ready rows, largest weight first."""
        items = sorted(self.components.items(), key=lambda kv: -kv[1])
        return [{"m": list(k), "w": w} for k, w in items]

    @classmethod
    def from_rows(cls, theta: Theta, rows: list[dict]) -> "DirichletMixture":
        comps: dict[tuple[int, ...], float] = {}
        for row in rows:
            key = tuple(int(v) for v in row["m"])
            comps[key] = comps.get(key, 0.0) + float(row["w"])
        return cls(theta, comps)
