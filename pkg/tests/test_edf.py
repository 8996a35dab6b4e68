import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import bruteforce as bf
from toprank.edf import EmpiricalDistribution, empirical_cdf, quantile
from toprank.errors import InputError

SCORES = (0.1, 0.3, 0.7, 0.9)


class TestCdf:
    def test_direct_count(self):
        assert empirical_cdf(EmpiricalDistribution(SCORES), 0.3) == 0.5

    def test_extremes(self):
        d = EmpiricalDistribution(SCORES)
        assert d.cdf(0.0) == 0.0
        assert d.cdf(0.9) == 1.0
        assert d.cdf(5.0) == 1.0


class TestQuantile:
    @pytest.mark.parametrize("v, expected", [(0.5, 0.3), (1.0, 0.9), (0.25, 0.1), (0.26, 0.3)])
    def test_examples(self, v, expected):
        assert quantile(EmpiricalDistribution(SCORES), v) == expected

    def test_raw_vector(self):
        assert quantile(list(SCORES), 0.75) == 0.7

    @pytest.mark.parametrize("v", [0.0, -0.1, 1.01])
    def test_rejects_out_of_range(self, v):
        with pytest.raises(InputError):
            quantile(SCORES, v)

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(InputError):
            EmpiricalDistribution([])
        with pytest.raises(InputError):
            EmpiricalDistribution([0.1, np.inf])


@given(st.lists(st.integers(-20, 20), min_size=1, max_size=30), st.floats(0.01, 1.0))
def test_quantile_matches_inf_definition(values, v):
    scores = [float(x) for x in values]
    assert quantile(scores, v) == bf.quantile(scores, v)


@given(st.lists(st.integers(-20, 20), min_size=1, max_size=30), st.floats(0.01, 1.0))
def test_galois_connection(values, v):
    # cdf(q) >= v, and anything strictly below q has cdf < v
    d = EmpiricalDistribution([float(x) for x in values])
    q = d.quantile(v)
    assert d.cdf(q) >= v - 1e-9
    below = [x for x in d.sorted_scores if x < q]
    if below:
        assert d.cdf(max(below)) < v - 1e-12 or abs(d.cdf(max(below)) - v) < 1e-9
