"""Mass-constrained classification risk and the signed-rank functional.

All estimators here count integers first and divide last, so that passing
``exact=True`` returns a :class:`fractions.Fraction` with no rounding.
Population values (K, K', Q) always come in as arguments; nothing here
estimates them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import check_rate, count_at_level
from .errors import InputError, NumericalError

__all__ = [
    "MassConstrainedRisk",
    "DecompositionSample",
    "as_arrays",
    "order_statistic",
    "hat_L",
    "L_fixed_threshold",
    "hat_K",
    "hat_K_via_signed_ranks",
    "z_term",
    "sigma_sq",
    "lambda_remainder",
    "decompose",
]


def as_arrays(scores, labels, min_n=1):
    s = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise InputError(f"{s.size} scores but {y.size} labels")
    if s.size < min_n:
        raise InputError(f"need at least {min_n} observation(s), got {s.size}")
    if not np.all(np.isfinite(s)):
        raise InputError("scores must be finite")
    if not np.all((y == 1) | (y == -1)):
        raise InputError("labels must be -1 or +1")
    return s, y.astype(np.int64)


def order_statistic(scores: np.ndarray, v: float) -> float:
    """ceil(n*v)-th smallest score: the empirical generalized inverse at level v."""
    if not (0.0 < v <= 1.0):
        raise InputError(f"quantile level must lie in (0, 1], got {v}")
    k = max(count_at_level(scores.size, v), 1)
    return float(np.partition(scores, k - 1)[k - 1])


def _ratio(num: int, den: int, exact: bool):
    return Fraction(num, den) if exact else num / den


@dataclass(frozen=True)
class MassConstrainedRisk:
    l_hat: float
    q_hat: float
    positive_count: int
    error_count: int
    n: int

    @property
    def l_exact(self) -> Fraction:
        return Fraction(self.error_count, self.n)


def hat_L(scores, labels, u0) -> MassConstrainedRisk:
    """Truly empirical mass-constrained error, thresholded at the empirical (1-u0)-quantile.

    Errors use the strict test ``y * (s - q) < 0``, so a point sitting exactly
    on the threshold is never an error.
    """
    u0 = check_rate(u0)
    s, y = as_arrays(scores, labels)
    q = order_statistic(s, 1.0 - u0)
    errors = int(np.count_nonzero(y * (s - q) < 0))
    return MassConstrainedRisk(
        l_hat=errors / s.size,
        q_hat=q,
        positive_count=int(np.count_nonzero(s >= q)),
        error_count=errors,
        n=s.size,
    )


def L_fixed_threshold(scores, labels, q: float, exact=False):
    """Same error count with a supplied threshold in place of the empirical quantile."""
    s, y = as_arrays(scores, labels)
    return _ratio(int(np.count_nonzero(y * (s - q) < 0)), s.size, exact)


def hat_K(scores, labels, v: float, exact=False):
    """(1/n) * sum of labels over points scored at or below the empirical v-quantile."""
    s, y = as_arrays(scores, labels)
    q = order_statistic(s, v)
    return _ratio(int(y[s <= q].sum()), s.size, exact)


def hat_K_via_signed_ranks(scores, labels, v: float, exact=False):
    """The same statistic written as a linear signed rank statistic.

    With Z_i = y_i * s_i, |Z_i| = s_i and sgn(Z_i) = y_i; the score generating
    function is the indicator of rank(|Z_i|) <= ceil(n*v). Requires distinct,
    strictly positive scores.
    """
    s, y = as_arrays(scores, labels)
    if np.any(s <= 0):
        raise InputError("signed-rank form needs strictly positive scores")
    z = y * s
    a = np.abs(z)
    order = np.argsort(a, kind="stable")
    if np.any(np.diff(a[order]) == 0):
        raise InputError("signed-rank form needs distinct scores (tied |Z|)")
    ranks = np.empty(a.size, dtype=np.int64)
    ranks[order] = np.arange(1, a.size + 1)
    cut = max(count_at_level(a.size, v), 1)
    total = int(np.sign(z[ranks <= cut]).sum())
    return _ratio(total, a.size, exact)


def z_term(scores, labels, v: float, k_true: float, k_prime_true: float, q_true: float) -> float:
    """Centered leading term of the expansion, using population K, K' and Q."""
    s, y = as_arrays(scores, labels)
    below = s <= q_true
    return float(np.mean((y - k_prime_true) * below)) - k_true + v * k_prime_true


def sigma_sq(v: float, k_true: float, k_prime_true: float) -> float:
    """Variance of one summand of the leading term (so n * Var(Z_n) equals this)."""
    if not (0.0 < v <= 1.0):
        raise InputError(f"v must lie in (0, 1], got {v}")
    k, kp = k_true, k_prime_true
    out = v - k * k + v * (1.0 - v) * kp * kp - 2.0 * (1.0 - v) * kp * k
    if out < -1e-12:
        raise NumericalError(
            f"negative variance {out} from v={v}, K={k}, K'={kp}: inconsistent population values"
        )
    return max(out, 0.0)


def lambda_remainder(scores, labels, v, k_true, k_prime_true, q_true) -> float:
    """Remainder hat_K - K - Z_n."""
    return decompose(scores, labels, v, k_true, k_prime_true, q_true).lambda_n


@dataclass(frozen=True)
class DecompositionSample:
    k_hat: float
    k_true: float
    k_prime_true: float
    z_n: float
    lambda_n: float
    sigma_sq: float


def decompose(scores, labels, v, k_true, k_prime_true, q_true) -> DecompositionSample:
    k_hat = hat_K(scores, labels, v)
    z = z_term(scores, labels, v, k_true, k_prime_true, q_true)
    return DecompositionSample(
        k_hat=k_hat,
        k_true=k_true,
        k_prime_true=k_prime_true,
        z_n=z,
        lambda_n=k_hat - k_true - z,
        sigma_sq=sigma_sq(v, k_true, k_prime_true),
    )

