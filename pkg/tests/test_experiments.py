import json

import numpy as np
import pytest

from toprank.core import Linear, Piece, PiecewiseLinear1D, PiecewiseMonotone1D, identity
from toprank.erm import Criterion, ErmProblem, FiniteFamily, PiecewiseFamily
from toprank.errors import InputError
from toprank.experiments import (
    Band,
    decomposition_study,
    fit_slope,
    identity_suite,
    population_residuals,
    rate_study,
    reflection_family,
    two_window_family,
)
from toprank.oracle import excess_risk, true_report, uniform_model


def reflection_problem(deltas=(0.0, 0.05, 0.1, 0.15)):
    return ErmProblem(FiniteFamily(reflection_family(0.8, deltas)), Criterion.L_HAT, 0.2)


class TestSlope:
    def test_exact_power_law(self):
        n = np.array([100, 200, 400, 800])
        slope, se = fit_slope(n, 3.0 * n**-0.5)
        assert slope == pytest.approx(-0.5, abs=1e-12)
        assert se == pytest.approx(0.0, abs=1e-10)

    def test_undefined(self):
        assert fit_slope([100], [0.1]) == (None, None)
        assert fit_slope([100, 200], [0.1, 0.0]) == (None, None)


class TestFamilies:
    def test_reflection_excess_is_two_delta_squared(self, unif):
        for delta, s in zip((0.0, 0.05, 0.1), reflection_family(0.8, (0.0, 0.05, 0.1), order_seed=None)):
            assert excess_risk(unif, s, 0.2) == pytest.approx(2 * delta**2, abs=1e-9)

    def test_reflection_order_is_a_permutation(self):
        deltas = np.arange(10) * 0.01
        a = [s.name for s in reflection_family(0.8, deltas, order_seed=None)]
        b = [s.name for s in reflection_family(0.8, deltas, order_seed=3)]
        assert sorted(a) == sorted(b) and a != b

    def test_two_window_excludes_optimum(self, unif):
        gaps = [excess_risk(unif, s, 0.2) for s in two_window_family(0.2, 6, 0.01)]
        assert min(gaps) > 1e-4
        assert all(isinstance(s, PiecewiseLinear1D) for s in two_window_family(0.2, 6, 0.01))


class TestRateStudy:
    def test_small_study(self, unif):
        res = rate_study(unif, reflection_problem(), [200, 800, 3200], reps=20, seed=0)
        assert res.slope_defined
        assert res.mean[-1] < res.mean[0]
        assert all(0.0 <= e <= 2 * 0.15**2 + 1e-9 for row in res.excess for e in row)
        assert set(json.loads(res.to_json())) >= {"slope", "band_pass", "mean_excess", "clipped_negatives"}
        assert res.to_csv().splitlines()[0] == "n,rep,excess,selected"

    def test_excess_matches_selected_member(self, unif):
        prob = reflection_problem()
        res = rate_study(unif, prob, [300], reps=5, seed=1)
        for e, sel in zip(res.excess[0], res.selections[0]):
            assert e == pytest.approx(max(0.0, excess_risk(unif, prob.family.members[sel], 0.2)), abs=1e-9)

    def test_single_point_leaves_slope_undefined(self, unif):
        res = rate_study(unif, reflection_problem(), [500], reps=1, seed=0)
        assert not res.slope_defined and res.band_pass is None
        assert res.passed and res.warnings()

    def test_band_failure_reported(self, unif):
        res = rate_study(unif, reflection_problem(), [200, 800, 3200], reps=20, seed=0, band=Band(0.5, 1.0))
        assert not res.passed and "outside band" in res.failures()[0]

    def test_worker_count_does_not_change_output(self, unif):
        a = rate_study(unif, reflection_problem(), [200, 400], reps=6, seed=2, workers=1)
        b = rate_study(unif, reflection_problem(), [200, 400], reps=6, seed=2, workers=3)
        assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()

    def test_family_reference(self, unif):
        prob = ErmProblem(FiniteFamily(two_window_family(0.2, 6, 0.01)), Criterion.L_HAT, 0.2)
        res = rate_study(unif, prob, [400], reps=4, seed=0, reference="family")
        best = min(true_report(unif, s, 0.2).l for s in prob.family.members)
        assert res.reference_value == pytest.approx(best, abs=1e-15)

    def test_search_family_runs(self, unif):
        prob = ErmProblem(PiecewiseFamily(4, 4, 0.2, 2.0), Criterion.L_HAT, 0.2, budget=10, seed=0)
        res = rate_study(unif, prob, [200, 400], reps=2, seed=0)
        assert all(e >= 0 for row in res.excess for e in row)

    def test_validation(self, unif):
        with pytest.raises(InputError):
            rate_study(unif, reflection_problem(), [400, 200], reps=2, seed=0)
        with pytest.raises(InputError):
            rate_study(unif, reflection_problem(), [200], reps=0, seed=0)
        with pytest.raises(InputError):
            rate_study(unif, reflection_problem(), [200], reps=2, seed=0, reference="family2")
        loc = ErmProblem(FiniteFamily(reflection_family(0.8, (0.0, 0.1))), Criterion.LOCAUC, 0.2)
        with pytest.raises(InputError):
            rate_study(unif, loc, [200], reps=2, seed=0)


class TestDecomposition:
    def test_small_study(self, unif):
        res = decomposition_study(unif, identity(), 0.8, [250, 1000], reps=200, seed=0)
        assert res.sigma_sq == pytest.approx(0.8704, abs=1e-9)
        assert res.k_true == pytest.approx(-0.16, abs=1e-9)
        assert res.slope is not None and res.slope < 0
        for n, rows in zip(res.n_grid, res.raw):
            assert all(abs(lam) < 1 for _, lam in rows)

    def test_v_one_has_no_slope(self, unif):
        res = decomposition_study(unif, identity(), 1.0, [100, 200], reps=10, seed=0)
        assert res.slope is None
        # at v = 1 the quantile is the maximum and the remainder vanishes
        assert res.median_abs_lambda == pytest.approx((0.0, 0.0), abs=0.02)

    def test_worker_invariance(self, unif):
        a = decomposition_study(unif, identity(), 0.8, [100, 200], reps=8, seed=4)
        b = decomposition_study(unif, identity(), 0.8, [100, 200], reps=8, seed=4, workers=4)
        assert a.to_csv() == b.to_csv()

    def test_validation(self, unif):
        with pytest.raises(InputError):
            decomposition_study(unif, identity(), 0.8, [100], reps=1, seed=0)
        with pytest.raises(InputError):
            decomposition_study(unif, identity(), 0.0, [100], reps=5, seed=0)


class TestIdentities:
    def test_population_residuals_vanish(self, unif):
        s = PiecewiseLinear1D((0.0, 0.4, 1.0), (0.0, 1.0, 0.3))
        for name, r in population_residuals(unif, s, 0.3).items():
            assert abs(r) <= 1e-8, name

    def test_eta_dominates_anti_eta(self, unif):
        r = population_residuals(unif, Linear((-1.0,)), 0.2)
        assert r["dominance_beta"] == r["dominance_w"] == 0.0

    def test_suite_passes_with_exact_zeros(self, unif):
        s = PiecewiseLinear1D((0.0, 0.5, 1.0), (0.0, 1.0, 0.4))
        rep = identity_suite(unif, [identity(), s], [0.2, 0.5], n_empirical=3000, seed=0, locauc_tol=0.05)
        assert rep.passed, rep.failures()
        exact = [e for e in rep.entries if e.exact]
        assert exact and all(e.residual == 0.0 for e in exact)
        assert rep.worst("risk_alpha") < 1e-8

    def test_ties_rejected(self, unif):
        flat = PiecewiseMonotone1D((
            Piece(0.0, 0.5, lambda x: 0.0 * np.asarray(x), "const"),
            Piece(0.5, 1.0, lambda x: np.asarray(x) - 0.5, "inc", lambda t: t + 0.5),
        ))
        with pytest.raises(InputError, match="tied"):
            identity_suite(unif, [flat], [0.2], n_empirical=200, seed=0)

    def test_other_model(self):
        model = uniform_model("logistic", a=5.0, b=-3.0)
        rep = identity_suite(model, [identity()], [0.25], n_empirical=2000, seed=1, locauc_tol=0.05)
        assert rep.passed, rep.failures()
