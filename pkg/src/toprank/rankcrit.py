"""Empirical ranking criteria focused on the top of the list.

Every statistic is derived from one pass of integer pair/rank counts
(:func:`pair_counts`, O(n log n) via sorting). Floats are produced only at the
end, and every function takes ``exact=True`` to return a ``Fraction``, which
makes the finite-sample identities checkable with zero residual.

Conventions: pair comparisons are strict (ties count as neither concordant
nor discordant); the top set is {i : s_i >= q_hat} with q_hat the empirical
(1 - u0)-quantile. ``GLOBAL`` puts every point in the top set (q_hat is the
minimum score). Rank statistics refuse tied scores.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .classify import as_arrays, order_statistic
from .core import GLOBAL, check_rate
from .errors import ConsistencyError, InputError

__all__ = [
    "PairCounts",
    "RocPoint",
    "MDecomposition",
    "CriterionReport",
    "pair_counts",
    "hat_auc",
    "roc_points",
    "roc_step_area",
    "hat_locauc",
    "trunc_auc",
    "hat_R_local",
    "t_wilcoxon",
    "t_local",
    "w_hat",
    "hat_M",
    "full_report",
    "write_roc_csv",
]


def _floor_at_level(m: int, v: float) -> int:
    x = m * v
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return int(math.floor(x))


@dataclass(frozen=True)
class PairCounts:
    """Integer sufficient statistics for every criterion at one rate."""

    u0: object
    n: int
    n_pos: int
    n_neg: int
    q_hat: float
    top_pos: int            # positives with s >= q_hat
    top_neg: int            # negatives with s >= q_hat
    errors: int             # y * (s - q_hat) < 0
    concordant: int         # (neg i, pos j) with s_j > s_i
    local_concordant: int   # ... and s_j >= q_hat
    top_discordant: int     # (neg i, pos j) with s_j < s_i, both >= q_hat
    trunc_pairs: int        # (neg i, pos j) with s_i >= q_hat and s_j > s_i
    rank_sum_pos: int | None      # None when scores are tied
    local_rank_sum_pos: int | None

    @property
    def has_ties(self) -> bool:
        return self.rank_sum_pos is None


def pair_counts(scores, labels, u0) -> PairCounts:
    u0 = check_rate(u0, allow_global=True)
    s, y = as_arrays(scores, labels)
    n = s.size
    pos, neg = s[y == 1], s[y == -1]
    q = float(s.min()) if u0 is GLOBAL else order_statistic(s, 1.0 - u0)

    pos_sorted, neg_sorted = np.sort(pos), np.sort(neg)
    below_pos = np.searchsorted(neg_sorted, pos, side="left")
    top_p = pos >= q
    top_neg_sorted = neg_sorted[neg_sorted >= q]
    above_top_pos = top_neg_sorted.size - np.searchsorted(top_neg_sorted, pos[top_p], side="right")
    top_n = neg >= q
    pos_above_neg = pos_sorted.size - np.searchsorted(pos_sorted, neg[top_n], side="right")

    rank_sum = local_rank_sum = None
    order = np.argsort(s, kind="stable")
    if np.all(np.diff(s[order]) > 0):
        ranks = np.empty(n, dtype=np.int64)
        ranks[order] = np.arange(1, n + 1)
        pr = ranks[y == 1]
        rank_sum = int(pr.sum())
        if u0 is GLOBAL:
            local_rank_sum = rank_sum
        else:
            cut = _floor_at_level(n + 1, 1.0 - u0)  # rank/(n+1) > 1-u0  <=>  rank > cut
            local_rank_sum = int(pr[pr > cut].sum())

    return PairCounts(
        u0=u0,
        n=n,
        n_pos=int(pos.size),
        n_neg=int(neg.size),
        q_hat=q,
        top_pos=int(np.count_nonzero(top_p)),
        top_neg=int(np.count_nonzero(top_n)),
        errors=int(np.count_nonzero(y * (s - q) < 0)),
        concordant=int(below_pos.sum()),
        local_concordant=int(below_pos[top_p].sum()),
        top_discordant=int(above_top_pos.sum()),
        trunc_pairs=int(pos_above_neg.sum()),
        rank_sum_pos=rank_sum,
        local_rank_sum_pos=local_rank_sum,
    )


def _need_two_classes(c: PairCounts, what: str):
    if c.n_pos == 0 or c.n_neg == 0:
        raise InputError(f"{what} needs both classes present (n_pos={c.n_pos}, n_neg={c.n_neg})")


def _need_distinct(c: PairCounts, what: str):
    if c.has_ties:
        raise InputError(f"{what} is a rank statistic and needs distinct scores; the sample has ties")


def _out(x: Fraction, exact: bool):
    return x if exact else float(x)


# -- exact (Fraction) forms ------------------------------------------------


def _auc(c):
    return Fraction(c.concordant, c.n_pos * c.n_neg)


def _alpha(c):
    return Fraction(c.top_neg, c.n_neg)


def _beta(c):
    return Fraction(c.top_pos, c.n_pos)


def _locauc(c):
    return Fraction(c.local_concordant, c.n_pos * c.n_neg)


def _trunc(c):
    return _locauc(c) - _beta(c) + _alpha(c) * _beta(c)


def _r_local(c):
    return Fraction(2 * c.top_discordant, c.n * (c.n - 1))


def _l_hat(c):
    return Fraction(c.errors, c.n)


def _m_hat(c):
    return _r_local(c) + Fraction(c.n_neg, c.n) * _l_hat(c)


def _t_wilcoxon(c):
    return Fraction(c.rank_sum_pos, c.n + 1)


def _t_local(c):
    return Fraction(c.local_rank_sum_pos, c.n + 1)


# -- public operations ------------------------------------------------------


def hat_auc(scores, labels, exact=False):
    """Rate of concordant (negative, positive) pairs."""
    c = pair_counts(scores, labels, GLOBAL)
    _need_two_classes(c, "AUC")
    return _out(_auc(c), exact)


@dataclass(frozen=True)
class RocPoint:
    u: float
    alpha_hat: float
    beta_hat: float


def roc_points(scores, labels, u_grid) -> list[RocPoint]:
    """ROC curve reparametrized by the top-rate u."""
    out = []
    for u in u_grid:
        c = pair_counts(scores, labels, u)
        _need_two_classes(c, "ROC")
        out.append(RocPoint(float(u), float(_alpha(c)), float(_beta(c))))
    return out


def roc_step_area(scores, labels, u0, exact=False):
    """Area under the empirical ROC step curve from alpha = 0 to alpha_hat(u0).

    Sweeps thresholds from the top score down. Each negative adds a strip of
    width 1/n_neg at the height of the positives strictly above it; this is
    the direct evaluation of the truncated AUC, independent of pair counts.
    """
    u0 = check_rate(u0, allow_global=True)
    s, y = as_arrays(scores, labels)
    n_pos, n_neg = int(np.count_nonzero(y == 1)), int(np.count_nonzero(y == -1))
    if n_pos == 0 or n_neg == 0:
        raise InputError("ROC area needs both classes present")
    q = float(s.min()) if u0 is GLOBAL else order_statistic(s, 1.0 - u0)
    order = np.lexsort((y, -s))  # descending score; within a tie, negatives first
    area = 0
    pos_strictly_above = 0
    pos_at_current = 0
    current = None
    for i in order:
        if s[i] != current:
            pos_strictly_above += pos_at_current
            pos_at_current = 0
            current = s[i]
        if s[i] < q:
            break
        if y[i] == 1:
            pos_at_current += 1
        else:
            area += pos_strictly_above
    return _out(Fraction(area, n_pos * n_neg), exact)


def hat_locauc(scores, labels, u0, exact=False):
    """Pairs (negative i, positive j) with s_j > s_i and s_j >= q_hat, over n_pos * n_neg."""
    c = pair_counts(scores, labels, u0)
    _need_two_classes(c, "LocAUC")
    return _out(_locauc(c), exact)


def trunc_auc(scores, labels, u0, exact=False):
    """Truncated AUC, via LocAUC - beta_hat + alpha_hat * beta_hat."""
    c = pair_counts(scores, labels, u0)
    _need_two_classes(c, "truncated AUC")
    return _out(_trunc(c), exact)


def hat_R_local(scores, labels, u0, exact=False):
    """Ordered discordant pairs with both scores >= q_hat, over n(n-1)."""
    c = pair_counts(scores, labels, u0)
    if c.n < 2:
        raise InputError("local ranking error needs n >= 2")
    return _out(_r_local(c), exact)


def t_wilcoxon(scores, labels, exact=False):
    """Sum over positives of rank / (n + 1)."""
    c = pair_counts(scores, labels, GLOBAL)
    _need_distinct(c, "t_wilcoxon")
    return _out(_t_wilcoxon(c), exact)


def t_local(scores, labels, u0, exact=False):
    """Sum over positives of Phi(rank/(n+1)) with Phi(v) = v * 1{v > 1 - u0}."""
    c = pair_counts(scores, labels, u0)
    _need_distinct(c, "t_local")
    return _out(_t_local(c), exact)


def w_hat(scores, labels, u0, exact=False):
    c = pair_counts(scores, labels, u0)
    _need_distinct(c, "w_hat")
    if c.n_pos == 0:
        raise InputError("w_hat is undefined without positives")
    return _out(_t_local(c) / c.n_pos, exact)


@dataclass(frozen=True)
class MDecomposition:
    m_hat: float
    r_local_hat: float
    l_hat: float
    neg_fraction: float


def hat_M(scores, labels, u0, exact=False):
    """Combined criterion r_local_hat + (n_neg/n) * l_hat, returned with its parts."""
    c = pair_counts(scores, labels, u0)
    if c.n < 2:
        raise InputError("M criterion needs n >= 2")
    _need_two_classes(c, "M criterion")
    parts = (_m_hat(c), _r_local(c), _l_hat(c), Fraction(c.n_neg, c.n))
    if exact:
        return MDecomposition(*parts)
    return MDecomposition(*(float(p) for p in parts))


@dataclass(frozen=True)
class CriterionReport:
    u0: object
    q_hat: float
    l_hat: float
    auc_hat: float
    locauc_hat: float
    trunc_auc_hat: float
    r_local_hat: float
    t_wilcoxon: float | None
    t_local: float | None
    w_hat: float | None
    m_hat: float
    alpha_hat: float
    beta_hat: float
    p_hat: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["u0"] = "global" if self.u0 is GLOBAL else self.u0
        return {k: v for k, v in d.items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def full_report(scores, labels, u0, rank_stats="auto") -> CriterionReport:
    """Every empirical criterion for one (scores, labels, u0).

    ``rank_stats``: ``"auto"`` omits the rank fields when scores are tied,
    ``True`` raises on ties, ``False`` always omits them.
    """
    c = pair_counts(scores, labels, u0)
    if c.n < 2:
        raise InputError("report needs n >= 2")
    _need_two_classes(c, "report")
    want_ranks = rank_stats is True or (rank_stats == "auto" and not c.has_ties)
    if rank_stats is True:
        _need_distinct(c, "t_wilcoxon")
    auc, loc = _auc(c), _locauc(c)
    alpha, beta = _alpha(c), _beta(c)
    r, l_hat = _r_local(c), _l_hat(c)
    m = _m_hat(c)

    # internal cross-identities; all exact in rationals
    if loc > auc or loc > beta:
        raise ConsistencyError("LocAUC exceeds AUC or beta_hat")
    if Fraction(c.n_pos, c.n) * beta + Fraction(c.n_neg, c.n) * alpha != Fraction(c.top_pos + c.top_neg, c.n):
        raise ConsistencyError("empirical D-line identity failed")
    if m != r + Fraction(c.n_neg, c.n) * l_hat:
        raise ConsistencyError("M decomposition failed")
    tw = tl = w = None
    if want_ranks:
        tw, tl = _t_wilcoxon(c), _t_local(c)
        lhs = (c.n_pos * c.n_neg * auc + Fraction(c.n_pos * (c.n_pos + 1), 2)) / (c.n + 1)
        if lhs != tw:
            raise ConsistencyError("Wilcoxon/AUC identity failed")
        w = tl / c.n_pos
    return CriterionReport(
        u0=c.u0,
        q_hat=c.q_hat,
        l_hat=float(l_hat),
        auc_hat=float(auc),
        locauc_hat=float(loc),
        trunc_auc_hat=float(_trunc(c)),
        r_local_hat=float(r),
        t_wilcoxon=None if tw is None else float(tw),
        t_local=None if tl is None else float(tl),
        w_hat=None if w is None else float(w),
        m_hat=float(m),
        alpha_hat=float(alpha),
        beta_hat=float(beta),
        p_hat=c.n_pos / c.n,
    )


def write_roc_csv(points: list[RocPoint], p_hat: float, fh) -> None:
    """CSV ``u,alpha,beta,d_line`` where d_line = p_hat*beta + (1-p_hat)*alpha."""
    fh.write("u,alpha,beta,d_line\n")
    for pt in points:
        d = p_hat * pt.beta_hat + (1.0 - p_hat) * pt.alpha_hat
        fh.write(f"{pt.u!r},{pt.alpha_hat!r},{pt.beta_hat!r},{d!r}\n")
