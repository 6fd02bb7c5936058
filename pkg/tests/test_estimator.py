import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from truncexp import model
from truncexp.dataio import enterprise_records
from truncexp.estimator import (
    FitError,
    ObservedRecord,
    SufficientStats,
    confidence_interval,
    fit_mle,
    population_size_estimate,
    profiled_objective,
    standard_error,
    summarize,
    summarize_arrays,
)
from truncexp.model import ParamDomain, StudyWindow
from truncexp.oracle import GridSpec, grid_argmax
from truncexp.simulator import SimConfig, simulate_sample

W2 = StudyWindow(2, 10)


@pytest.fixture(scope="module")
def enterprise_stats():
    return {G: summarize(enterprise_records(G), StudyWindow(2, G)) for G in (5, 10, 15, 30, 50, 100, 200)}


class TestRecords:
    def test_unobservable_rejected(self):
        with pytest.raises(ValueError):
            ObservedRecord.of(1.0, 1, 1)

    @pytest.mark.parametrize("weight", [-1, math.nan, math.inf])
    def test_bad_weight(self, weight):
        with pytest.raises(ValueError):
            ObservedRecord.of(1.0, 0, 0, weight)


class TestSummarize:
    def test_enterprise_coefficients(self, enterprise_stats):
        st_ = enterprise_stats[10]
        assert st_.m == 1_028_761
        assert abs(st_.mean_y - 0.9952764) < 1e-7
        assert abs(st_.mean_l - 0.5456311) < 1e-7
        assert abs(st_.mean_unc - 0.0490221) < 1e-7

    def test_single_record(self):
        st_ = summarize([ObservedRecord.of(1, 0, 0)], W2)
        assert (st_.m, st_.mean_y, st_.mean_l, st_.mean_unc) == (1, 1, 0, 1)

    def test_weight_is_multiplicity(self):
        a = summarize([ObservedRecord.of(0.7, 1, 0, 2), ObservedRecord.of(1.1, 0, 1)], W2)
        b = summarize([ObservedRecord.of(0.7, 1, 0), ObservedRecord.of(0.7, 1, 0), ObservedRecord.of(1.1, 0, 1)], W2)
        assert a == b

    def test_zero_weight_ignored(self):
        a = summarize([ObservedRecord.of(0.7, 1, 0), ObservedRecord.of(1.1, 0, 1, 0)], W2)
        assert a.m == 1 and a.mean_unc == 0

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize([], W2)
        with pytest.raises(ValueError, match="no positive-weight"):
            summarize([ObservedRecord.of(0.5, 1, 0, 0)], W2)

    def test_outside_support_names_record(self):
        recs = [ObservedRecord.of(0.5, 1, 0), ObservedRecord.of(2.5, 0, 1)]
        with pytest.raises(ValueError, match="record 1"):
            summarize(recs, W2)

    @given(st.lists(st.tuples(st.floats(0, 1.99), st.sampled_from([(0, 0), (0, 1), (1, 0)]), st.floats(0.01, 1e6)), min_size=1, max_size=40), st.randoms())
    def test_order_invariant(self, rows, rnd):
        recs = [ObservedRecord.of(y, l, r, wt) for y, (l, r), wt in rows]
        shuffled = recs[:]
        rnd.shuffle(shuffled)
        assert summarize(recs, W2) == summarize(shuffled, W2)

    def test_means_invariants(self):
        rng = np.random.default_rng(3)
        y = rng.uniform(0, 1.9, 500)
        cells = rng.integers(0, 3, 500)
        l = (cells == 2).astype(int)
        r = (cells == 1).astype(int)
        st_ = summarize_arrays(y, l, r, rng.uniform(0, 5, 500), W2)
        assert 0 <= st_.mean_y <= 2 and st_.mean_l + st_.mean_unc <= 1


class TestObjective:
    def test_term_dropout(self):
        st_ = SufficientStats.from_means(10, 0.8, 0, 0)
        th = 0.4
        assert profiled_objective(st_, th, W2) == pytest.approx(-math.log(model.alpha(th, W2)) - th * 0.8, abs=1e-15)

    def test_matches_expanded_unit_records(self):
        recs = [ObservedRecord.of(1.0, 0, 0, 3), ObservedRecord.of(0.5, 1, 0, 2), ObservedRecord.of(1.5, 0, 1, 4)]
        expanded = [rec.triple for rec in recs for _ in range(int(rec.weight))]
        direct = math.fsum(model.m_value(t, 0.3, W2) for t in expanded) / len(expanded)
        assert abs(profiled_objective(summarize(recs, W2), 0.3, W2) - direct) < 1e-10

    def test_enterprise_argmax_G5(self, enterprise_stats):
        th = np.geomspace(1e-6, 1e6, 2001)
        coarse = th[np.argmax(profiled_objective(enterprise_stats[5], th, StudyWindow(2, 5)))]
        fine = np.linspace(coarse * 0.9, coarse * 1.1, 200_001)
        best = fine[np.argmax(profiled_objective(enterprise_stats[5], fine, StudyWindow(2, 5)))]
        assert round(best, 4) == 0.2818


class TestFit:
    @pytest.mark.parametrize(
        "G, theta, life, alpha_",
        [(10, 0.1849, 5.41, 0.329), (200, 0.0921, None, 0.019)],
    )
    def test_enterprise(self, enterprise_stats, G, theta, life, alpha_):
        fit = fit_mle(enterprise_stats[G], StudyWindow(2, G))
        assert abs(fit.theta_hat - theta) <= 5e-5
        assert abs(fit.alpha_hat - alpha_) <= 5e-4
        if life is not None:
            assert abs(fit.life_expectancy - life) <= 5e-3
        assert fit.converged and not fit.at_boundary

    def test_invariants(self, enterprise_stats):
        w = StudyWindow(2, 30)
        fit = fit_mle(enterprise_stats[30], w)
        assert ParamDomain().contains(fit.theta_hat)
        assert fit.se > 0
        assert w.born_in_study < fit.alpha_hat < 1
        assert fit.n_hat >= enterprise_stats[30].m
        assert fit.ci_low < fit.theta_hat < fit.ci_high
        assert fit.life_expectancy == 1 / fit.theta_hat

    def test_stationary(self, enterprise_stats):
        from truncexp.estimator import profiled_score

        fit = fit_mle(enterprise_stats[15], StudyWindow(2, 15))
        assert abs(profiled_score(enterprise_stats[15], fit.theta_hat, StudyWindow(2, 15))) < 1e-9

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_grid_oracle_fine(self, seed):
        sample = simulate_sample(SimConfig(0.3, W2, 20_000, seed))
        stats = sample.stats(W2)
        fit = fit_mle(stats, W2).theta_hat
        g = GridSpec(0.2, 0.4, 200_001)  # resolution 1e-6
        assert abs(fit - grid_argmax(stats, W2, g)) <= 2e-6

    def test_weight_scaling_invariance(self):
        recs = enterprise_records(10)
        scaled = [ObservedRecord(r.triple, r.weight * 7.5) for r in recs]
        a = fit_mle(summarize(recs, W2), W2).theta_hat
        b = fit_mle(summarize(scaled, W2), W2).theta_hat
        assert abs(a - b) <= 1e-10

    @given(st.floats(0.3, 1.2), st.floats(0.01, 0.3))
    def test_monotone_in_mean_y(self, mean_y, bump):
        lo = SufficientStats.from_means(100, mean_y, 0.5, 0.05)
        hi = SufficientStats.from_means(100, mean_y + bump, 0.5, 0.05)
        assert fit_mle(hi, W2).theta_hat < fit_mle(lo, W2).theta_hat

    def test_boundary_maximum_flagged(self):
        # all mass censored right at study end: the criterion keeps rising as theta -> 0
        st_ = SufficientStats.from_means(10, 2.0, 0.0, 0.0)
        fit = fit_mle(st_, W2)
        assert fit.at_boundary and fit.converged
        assert fit.theta_hat == ParamDomain().lo

    def test_nonfinite_prescan(self):
        with pytest.raises(FitError, match="pre-scan"):
            fit_mle(SufficientStats.from_means(10, math.inf, 0.5, 0.1), W2)


class TestStandardError:
    @pytest.mark.parametrize("G, expected", [(10, 2.48e-4), (50, 3.13e-4)])
    def test_enterprise(self, enterprise_stats, G, expected):
        w = StudyWindow(2, G)
        fit = fit_mle(enterprise_stats[G], w)
        assert abs(standard_error(enterprise_stats[G], fit.theta_hat, w) - expected) <= 0.005e-4

    def test_records_and_stats_agree(self):
        recs = enterprise_records(10)
        th = 0.1849
        direct = math.sqrt(
            math.fsum(r.weight * model.m_d1(r.triple, th, W2) ** 2 for r in recs)
        ) / abs(math.fsum(r.weight * model.m_d2(r.triple, th, W2) for r in recs))
        assert standard_error(recs, th, W2) == pytest.approx(direct, rel=1e-12)

    def test_needs_cells(self):
        with pytest.raises(ValueError):
            standard_error(SufficientStats.from_means(10, 1, 0.5, 0.1), 0.3, W2)


class TestPopulationSize:
    def test_enterprise_G5(self, enterprise_stats):
        w = StudyWindow(2, 5)
        fit = fit_mle(enterprise_stats[5], w)
        n_hat = population_size_estimate(enterprise_stats[5], fit.theta_hat, w)
        assert n_hat == pytest.approx(1_028_761 / 0.574, rel=1e-3)

    def test_G200(self, enterprise_stats):
        w = StudyWindow(2, 200)
        fit = fit_mle(enterprise_stats[200], w)
        assert fit.n_hat == pytest.approx(1_028_761 / 0.019, rel=0.03)

    def test_limit(self):
        # alpha -> 1 as theta -> 0 with s close to G
        w = StudyWindow(9.999, 10)
        st_ = SufficientStats.from_means(50, 1.0, 0.0, 0.5)
        assert population_size_estimate(st_, 1e-6, w) == pytest.approx(50, rel=1e-3)


class TestConfidenceInterval:
    def test_reference(self):
        lo, hi = confidence_interval(0.1849, 2.48e-4, 0.95)
        assert (round(lo, 5), round(hi, 5)) == (0.18441, 0.18539)

    def test_width(self):
        lo, hi = confidence_interval(0.3, 0.01, 0.9)
        assert hi - lo == pytest.approx(2 * 1.6448536269514722 * 0.01, rel=1e-12)

    def test_collapse(self):
        lo, hi = confidence_interval(0.3, 0.01, 1e-12)
        assert lo == pytest.approx(0.3) and hi == pytest.approx(0.3)

    def test_clipped(self):
        assert confidence_interval(0.01, 1.0)[0] == 0.0

    @pytest.mark.parametrize("level", [0, 1, -0.5, 1.5])
    def test_bad_level(self, level):
        with pytest.raises(ValueError):
            confidence_interval(0.3, 0.01, level)


def test_tie_rule_leftmost():
    # -log alpha flattens to log(G/s) at huge theta, so grid values tie exactly
    st_ = SufficientStats.from_means(1, 0.0, 0.0, 0.0)
    g = GridSpec(1e17, 1e18, 901)
    vals = profiled_objective(st_, g.values(), W2)
    best = grid_argmax(st_, W2, g)
    first = g.values()[np.flatnonzero(vals == vals.max())[0]]
    assert best == first
    assert np.sum(vals == vals.max()) > 1
