import io
import json
from fractions import Fraction

import numpy as np
import pytest
from conftest import labelled_sample, rates
from hypothesis import given
from hypothesis import strategies as st

import bruteforce as bf
from toprank.core import GLOBAL
from toprank.errors import InputError
from toprank.rankcrit import (
    full_report,
    hat_auc,
    hat_locauc,
    hat_M,
    hat_R_local,
    pair_counts,
    roc_points,
    roc_step_area,
    t_local,
    t_wilcoxon,
    trunc_auc,
    w_hat,
    write_roc_csv,
)

S4 = [0.9, 0.7, 0.3, 0.1]
MIXED = [1, -1, 1, -1]
SPLIT = [1, 1, -1, -1]
S4B = [0.9, 0.2, 0.7, 0.1]


class TestAuc:
    def test_separated_and_reversed(self):
        assert hat_auc(S4, SPLIT) == 1.0
        assert hat_auc(S4, [-1, -1, 1, 1]) == 0.0

    def test_pair_enumeration(self):
        assert hat_auc(S4B, SPLIT) == 0.75

    def test_ties_count_as_neither(self):
        assert hat_auc([0.5, 0.5], [1, -1]) == 0.0

    def test_single_class_rejected(self):
        with pytest.raises(InputError):
            hat_auc([0.1, 0.2], [1, 1])

    @given(labelled_sample(distinct=False))
    def test_bruteforce(self, sample_):
        s, y = sample_
        assert hat_auc(s, y, exact=True) == bf.auc(s, y)


class TestRoc:
    def test_near_one(self):
        pt = roc_points(S4, MIXED, [1 - 1 / 8])[0]
        assert (pt.alpha_hat, pt.beta_hat) == (1.0, 1.0)

    def test_separated(self):
        # at u = 0.4 the top set is exactly the two positives
        pt = roc_points(S4, SPLIT, [0.4])[0]
        assert (pt.alpha_hat, pt.beta_hat) == (0.0, 1.0)

    def test_quantile_point_belongs_to_top_set(self):
        # at u = 0.5 the threshold is the 2nd order statistic, a negative, and it is kept
        pt = roc_points(S4, SPLIT, [0.5])[0]
        assert (pt.alpha_hat, pt.beta_hat) == (0.5, 1.0)

    def test_direct_count(self):
        pt = roc_points(S4, MIXED, [0.5])[0]
        assert (pt.alpha_hat, pt.beta_hat) == (0.5, 1.0)

    def test_csv(self):
        buf = io.StringIO()
        write_roc_csv(roc_points(S4, MIXED, [0.5]), 0.5, buf)
        assert buf.getvalue().splitlines() == ["u,alpha,beta,d_line", "0.5,0.5,1.0,0.75"]

    @given(labelled_sample(), st.floats(0.01, 0.99))
    def test_bruteforce(self, sample_, u):
        s, y = sample_
        pt = roc_points(s, y, [u])[0]
        a, b = bf.alpha_beta(s, y, u)
        assert (pt.alpha_hat, pt.beta_hat) == (float(a), float(b))


class TestLocAuc:
    def test_pair_enumeration(self):
        assert hat_locauc(S4B, SPLIT, 0.5) == 0.75

    def test_global_is_auc(self):
        assert hat_locauc(S4B, SPLIT, GLOBAL) == hat_auc(S4B, SPLIT)

    def test_no_qualifying_positive(self):
        assert hat_locauc([0.9, 0.8, 0.2, 0.1], [-1, -1, 1, 1], 0.5) == 0.0

    @given(labelled_sample(distinct=False), rates)
    def test_bruteforce(self, sample_, u0):
        s, y = sample_
        assert hat_locauc(s, y, u0, exact=True) == bf.locauc(s, y, u0)

    @given(labelled_sample(distinct=False), rates)
    def test_bounded_by_auc(self, sample_, u0):
        s, y = sample_
        assert hat_locauc(s, y, u0) <= hat_auc(s, y)


class TestTruncated:
    def test_example(self):
        assert trunc_auc(S4B, SPLIT, 0.5) == pytest.approx(0.25)
        assert trunc_auc(S4B, SPLIT, 0.5, exact=True) == Fraction(1, 4)

    def test_separated(self):
        # threshold above every negative: alpha_hat = 0 and no qualifying pair
        assert trunc_auc(S4, SPLIT, 0.4) == 0.0
        assert hat_locauc(S4, SPLIT, 0.4) == 1.0

    def test_global(self):
        assert trunc_auc(S4B, SPLIT, GLOBAL, exact=True) == hat_auc(S4B, SPLIT, exact=True)

    @given(labelled_sample(distinct=False), rates)
    def test_rearrangement_two_routes(self, sample_, u0):
        s, y = sample_
        assert trunc_auc(s, y, u0, exact=True) == roc_step_area(s, y, u0, exact=True) == bf.trunc(s, y, u0)


class TestLocalRankingError:
    def test_perfect(self):
        assert hat_R_local(S4, SPLIT, 0.5) == 0.0

    def test_example(self):
        assert hat_R_local(S4, MIXED, 0.5, exact=True) == Fraction(1, 6)

    def test_single_point_top(self):
        assert hat_R_local(S4, MIXED, 0.25) == 0.0

    @given(labelled_sample(distinct=False), rates)
    def test_bruteforce(self, sample_, u0):
        s, y = sample_
        assert hat_R_local(s, y, u0, exact=True) == bf.r_local(s, y, u0)


class TestWilcoxon:
    def test_rank_arithmetic(self):
        assert t_wilcoxon(S4, SPLIT) == pytest.approx(1.4)

    def test_no_positives(self):
        assert t_wilcoxon(S4, [-1, -1, -1, -1]) == 0.0

    def test_local(self):
        assert t_local(S4, SPLIT, 0.5) == pytest.approx(1.4)
        assert t_local(S4, [-1, -1, 1, 1], 0.1) == 0.0
        assert t_local(S4, MIXED, GLOBAL) == t_wilcoxon(S4, MIXED)

    def test_ties_rejected(self):
        with pytest.raises(InputError, match="t_wilcoxon"):
            t_wilcoxon([0.5, 0.5, 0.1], [1, -1, 1])

    @given(labelled_sample())
    def test_auc_relation_exact(self, sample_):
        s, y = sample_
        n, n_pos = len(s), sum(1 for v in y if v == 1)
        n_neg = n - n_pos
        lhs = (n_pos * n_neg * hat_auc(s, y, exact=True) + Fraction(n_pos * (n_pos + 1), 2)) / (n + 1)
        assert lhs == t_wilcoxon(s, y, exact=True) == bf.t_wilcoxon(s, y)

    @given(labelled_sample(), rates)
    def test_local_bruteforce(self, sample_, u0):
        s, y = sample_
        assert t_local(s, y, u0, exact=True) == bf.t_local(s, y, u0)
        n_pos = sum(1 for v in y if v == 1)
        assert w_hat(s, y, u0, exact=True) == bf.t_local(s, y, u0) / n_pos


class TestCombined:
    def test_example(self):
        m = hat_M(S4, MIXED, 0.5, exact=True)
        assert m.m_hat == Fraction(7, 24)
        assert (m.r_local_hat, m.l_hat) == (Fraction(1, 6), Fraction(1, 4))

    def test_perfect(self):
        assert hat_M(S4, SPLIT, 0.5).m_hat == 0.0

    @given(labelled_sample(distinct=False), rates)
    def test_bruteforce(self, sample_, u0):
        s, y = sample_
        assert hat_M(s, y, u0, exact=True).m_hat == bf.m_hat(s, y, u0)


class TestReport:
    def test_fields_match_operations(self):
        r = full_report(S4, MIXED, 0.5)
        assert r.m_hat == pytest.approx(7 / 24)
        assert r.r_local_hat == hat_R_local(S4, MIXED, 0.5)
        assert r.locauc_hat == hat_locauc(S4, MIXED, 0.5)
        assert r.l_hat == 0.25
        assert r.q_hat == 0.3

    def test_global(self):
        r = full_report(S4B, SPLIT, GLOBAL)
        assert r.locauc_hat == r.auc_hat
        assert r.t_local == r.t_wilcoxon
        assert json.loads(r.to_json())["u0"] == "global"

    def test_tie_policy(self):
        s, y = [0.5, 0.5, 0.1, 0.9], [1, -1, 1, -1]
        assert full_report(s, y, 0.5).w_hat is None
        assert "w_hat" not in full_report(s, y, 0.5, rank_stats=False).to_dict()
        with pytest.raises(InputError, match="t_wilcoxon"):
            full_report(s, y, 0.5, rank_stats=True)

    def test_rates_in_unit_interval(self, rng):
        s = rng.random(300)
        y = np.where(rng.random(300) < s, 1, -1)
        d = full_report(s, y, 0.2).to_dict()
        for key in ("l_hat", "auc_hat", "locauc_hat", "trunc_auc_hat", "r_local_hat", "m_hat", "alpha_hat", "beta_hat"):
            assert 0.0 <= d[key] <= 1.0

    @given(labelled_sample(), rates)
    def test_monotone_invariance(self, sample_, u0):
        s, y = sample_
        a = full_report(s, y, u0).to_dict()
        b = full_report([3.0 * v + 7.0 for v in s], y, u0).to_dict()
        assert b.pop("q_hat") == 3.0 * a.pop("q_hat") + 7.0
        assert a == b

    def test_pair_counts_summary(self):
        c = pair_counts(S4, MIXED, 0.5)
        assert (c.n_pos, c.n_neg, c.top_pos, c.top_neg) == (2, 2, 2, 1)
        assert not c.has_ties
