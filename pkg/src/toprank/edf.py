"""Empirical cdf and its generalized inverse."""

from __future__ import annotations

import numpy as np

from .core import count_at_level
from .errors import InputError


class EmpiricalDistribution:
    """Empirical distribution of a score sample.

    Sorting happens once here; :meth:`quantile` is then a single lookup.
    """

    __slots__ = ("sorted_scores",)

    def __init__(self, scores):
        s = np.sort(np.asarray(scores, dtype=float).reshape(-1))
        if s.size == 0:
            raise InputError("empirical distribution needs at least one score")
        if not np.all(np.isfinite(s)):
            raise InputError("scores must be finite")
        s.flags.writeable = False
        self.sorted_scores = s

    @property
    def n(self) -> int:
        return self.sorted_scores.size

    def cdf(self, t) -> float:
        """Fraction of scores <= t (right-continuous, exact count ratio)."""
        return int(np.searchsorted(self.sorted_scores, t, side="right")) / self.n

    def quantile(self, v: float) -> float:
        """inf{t : cdf(t) >= v}, i.e. the ceil(n*v)-th order statistic."""
        v = float(v)
        if not (0.0 < v <= 1.0):
            raise InputError(f"quantile level must lie in (0, 1], got {v}")
        k = max(count_at_level(self.n, v), 1)
        return float(self.sorted_scores[k - 1])

    def __repr__(self):
        return f"EmpiricalDistribution(n={self.n})"


def empirical_cdf(dist: EmpiricalDistribution, t) -> float:
    return dist.cdf(t)


def quantile(dist, v: float) -> float:
    """Generalized-inverse quantile; ``dist`` may also be a raw score vector."""
    if not isinstance(dist, EmpiricalDistribution):
        dist = EmpiricalDistribution(dist)
    return dist.quantile(v)
