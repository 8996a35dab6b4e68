"""Quadratic-time reference implementations in exact rational arithmetic.

Each criterion is computed straight from its pair or rank definition with
explicit loops, sharing no code with the package.
"""

from fractions import Fraction
from math import ceil


def quantile(scores, v):
    """Smallest observed t with #{s <= t} >= n*v (the generalized inverse)."""
    n = len(scores)
    target = n * v
    for t in sorted(scores):
        count = sum(1 for s in scores if s <= t)
        if count >= target - 1e-9:
            return t
    raise AssertionError("unreachable")


def top_threshold(scores, u0):
    return min(scores) if u0 is None else quantile(scores, 1 - u0)


def l_hat(scores, labels, u0):
    q = quantile(scores, 1 - u0)
    errs = sum(1 for s, y in zip(scores, labels) if y * (s - q) < 0)
    return Fraction(errs, len(scores))


def k_hat(scores, labels, v):
    q = quantile(scores, v)
    return Fraction(sum(y for s, y in zip(scores, labels) if s <= q), len(scores))


def auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == -1]
    hits = sum(1 for a in pos for b in neg if a > b)
    return Fraction(hits, len(pos) * len(neg))


def locauc(scores, labels, u0):
    q = top_threshold(scores, u0)
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == -1]
    hits = sum(1 for a in pos for b in neg if a >= q and a > b)
    return Fraction(hits, len(pos) * len(neg))


def trunc(scores, labels, u0):
    q = top_threshold(scores, u0)
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == -1]
    hits = sum(1 for a in pos for b in neg if b >= q and a > b)
    return Fraction(hits, len(pos) * len(neg))


def alpha_beta(scores, labels, u0):
    q = top_threshold(scores, u0)
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == -1]
    return (
        Fraction(sum(1 for b in neg if b >= q), len(neg)),
        Fraction(sum(1 for a in pos if a >= q), len(pos)),
    )


def r_local(scores, labels, u0):
    """Ordered pairs inside the top set ranked against their labels."""
    q = top_threshold(scores, u0)
    n = len(scores)
    bad = 0
    for i in range(n):
        for j in range(n):
            if i != j and scores[i] >= q and scores[j] >= q:
                if (scores[i] - scores[j]) * (labels[i] - labels[j]) < 0:
                    bad += 1
    return Fraction(bad, n * (n - 1))


def ranks(scores):
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    r = [0] * len(scores)
    for k, i in enumerate(order, start=1):
        r[i] = k
    return r


def t_wilcoxon(scores, labels):
    n = len(scores)
    return sum((Fraction(r, n + 1) for r, y in zip(ranks(scores), labels) if y == 1), Fraction(0))


def t_local(scores, labels, u0):
    n = len(scores)
    total = Fraction(0)
    for r, y in zip(ranks(scores), labels):
        x = Fraction(r, n + 1)
        if y == 1 and (u0 is None or x > 1 - Fraction(u0).limit_denominator(10**9)):
            total += x
    return total


def m_hat(scores, labels, u0):
    n_neg = sum(1 for y in labels if y == -1)
    return r_local(scores, labels, u0) + Fraction(n_neg, len(scores)) * l_hat(scores, labels, u0)


def needed_k(n, v):
    return ceil(n * v - 1e-9)
