import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from truncexp import model
from truncexp.model import CELLS, ObservedTriple, StudyWindow
from truncexp.simulator import (
    DegenerateSampleError,
    LatentUnit,
    SimConfig,
    StudyReport,
    draw_latent,
    mc_study,
    reduce,
    reduce_arrays,
    replication_rng,
    simulate_sample,
)

W = StudyWindow(2, 10)


class _FixedUniforms:
    """Stand-in generator whose successive ``random(n)`` calls return preset values."""

    def __init__(self, *batches):
        self._batches = list(batches)

    def random(self, n):
        return np.full(n, self._batches.pop(0))


class TestConfig:
    @pytest.mark.parametrize("kw", [{"theta0": 0}, {"theta0": math.inf}, {"n": 0}, {"n": 2.5}, {"seed": -1}])
    def test_rejects(self, kw):
        base = dict(theta0=0.3, w=W, n=10, seed=0)
        with pytest.raises(ValueError):
            SimConfig(**{**base, **kw})


class TestDrawLatent:
    def test_deterministic(self):
        cfg = SimConfig(0.3, W, 1000, seed=42)
        a, b = draw_latent(cfg), draw_latent(cfg)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.t, b.t)

    def test_seeds_differ(self):
        a = draw_latent(SimConfig(0.3, W, 100, seed=1))
        b = draw_latent(SimConfig(0.3, W, 100, seed=2))
        assert not np.array_equal(a.x, b.x)

    def test_exponential_mean(self):
        lat = draw_latent(SimConfig(0.5, W, 1_000_000, seed=11))
        assert abs(lat.x.mean() - 2.0) < 4 * 2.0 / 1000

    def test_support(self):
        lat = draw_latent(SimConfig(0.5, W, 100_000, seed=5))
        assert lat.t.min() >= -W.s and lat.t.max() <= W.G - W.s
        assert np.all(lat.x > 0)

    def test_unit_view(self):
        lat = draw_latent(SimConfig(0.5, W, 3, seed=5))
        assert len(lat) == 3
        assert list(lat)[1] == lat[1] == LatentUnit(float(lat.x[1]), float(lat.t[1]))

    def test_replication_streams_match_spawn(self):
        ref = np.random.SeedSequence(9).spawn(4)[3]
        assert replication_rng(9, 3).random() == np.random.default_rng(ref).random()


class TestReduce:
    S2 = StudyWindow(2, 10)

    @pytest.mark.parametrize(
        "x, t, expected",
        [
            (0.5, -1, ObservedTriple(0.5, 0, 0)),
            (3, -1, ObservedTriple(1, 0, 1)),
            (0.5, 1, None),
            (1.5, 1, ObservedTriple(0.5, 1, 0)),
            (5, 1, None),  # alive before and after the study
        ],
    )
    def test_cases(self, x, t, expected):
        assert reduce(LatentUnit(x, t), self.S2) == expected

    @given(st.floats(1e-6, 200), st.floats(0, 1), st.floats(0.1, 10), st.floats(0.1, 50))
    def test_invariants(self, x, v, s, extra):
        w = StudyWindow(s, s + extra)
        t = -s + w.G * v
        out = reduce(LatentUnit(x, t), w)
        observable = t <= 0 or (0 < t <= x <= t + s)
        assert (out is not None) == observable
        if out is not None:
            assert (out.l, out.r) != (1, 1)
            assert model.in_support(out.y, out.l, out.r, s) or (out.l, out.r) == (0, 0) and out.y == s

    def test_vectorized_matches_scalar(self):
        lat = draw_latent(SimConfig(0.3, W, 500, seed=3))
        y, l, r, obs = reduce_arrays(lat.x, lat.t, W)
        for i, u in enumerate(lat):
            got = reduce(u, W)
            assert (got is not None) == bool(obs[i])
            if got is not None:
                assert got == ObservedTriple(float(y[i]), int(l[i]), int(r[i]))


N_BIG = 1_000_000


@pytest.fixture(scope="module")
def big():
    return simulate_sample(SimConfig(0.3, W, N_BIG, seed=2024))


@pytest.fixture(scope="module")
def report():
    return mc_study(SimConfig(0.3, W, 5000, seed=3), replications=20)


class TestSimulateSample:
    def test_observed_fraction(self, big):
        a = model.alpha(0.3, W)
        assert abs(big.m_observed / big.n_latent - a) < 4 * math.sqrt(a * (1 - a) / N_BIG)

    def test_moment_means(self, big):
        a = model.alpha(0.3, W)
        m = big.m_observed
        for ind, target in (
            (big.l, model.moment_left(0.3, W) / a),
            ((1 - big.l) * (1 - big.r), model.moment_uncensored(0.3, W) / a),
        ):
            sigma = math.sqrt(target * (1 - target) / m)
            assert abs(ind.mean() - target) < 4 * sigma

    def test_all_records_in_support(self, big):
        assert not np.any((big.l == 1) & (big.r == 1))
        assert np.all((big.y >= 0) & (big.y <= W.s))

    def test_goodness_of_fit(self, big):
        edges = np.linspace(0, W.s, 21)
        observed, expected = [], []
        for l, r in CELLS:
            mask = (big.l == l) & (big.r == r)
            observed.append(np.histogram(big.y[mask], bins=edges)[0])
            f = lambda y, l=l, r=r: model.obs_density(ObservedTriple(y, l, r), 0.3, W)
            expected.append([integrate.quad(f, a, b, epsabs=1e-12)[0] for a, b in zip(edges[:-1], edges[1:])])
        observed = np.concatenate(observed)
        expected = np.concatenate(expected) * big.m_observed
        assert abs(expected.sum() - big.m_observed) < 1e-3 * big.m_observed
        chi2 = np.sum((observed - expected) ** 2 / expected)
        p = stats.chi2.sf(chi2, df=len(observed) - 1)
        assert p > 1e-3

    def test_degenerate(self):
        # huge lifespan (u -> 1) and born before the study (t > 0)
        cfg = SimConfig(0.3, W, 1, seed=0)
        with pytest.raises(DegenerateSampleError):
            simulate_sample(cfg, _FixedUniforms(1 - 1e-16, 0.9))

    def test_unit_weight_records(self):
        sample = simulate_sample(SimConfig(0.3, W, 200, seed=8))
        recs = sample.records()
        assert len(recs) == sample.m_observed
        assert all(rec.weight == 1.0 for rec in recs)


class TestStudy:
    def test_json_keys(self, report):
        doc = json.loads(report.to_json())
        assert set(doc) == set(StudyReport.JSON_KEYS)
        for key in ("mean_theta", "sd_theta", "mean_se", "coverage", "failures", "replications"):
            assert key in doc

    def test_report_shapes(self, report):
        assert report.failures == 0
        assert len(report.standardized) == len(report.theta_hats) == 20
        np.testing.assert_allclose(report.standardized, (report.theta_hats - 0.3) / report.ses)

    def test_reproducible(self, report):
        again = mc_study(SimConfig(0.3, W, 5000, seed=3), replications=20)
        assert again.to_json() == report.to_json()

    def test_failures_counted(self):
        # five latent units: many replications see nothing or a boundary fit
        rep = mc_study(SimConfig(0.3, W, 5, seed=0), replications=40)
        assert 0 < rep.failures < 40
        assert len(rep.theta_hats) == 40 - rep.failures

    @pytest.mark.parametrize("reps, level", [(1, 0.95), (10, 1.0)])
    def test_bad_arguments(self, reps, level):
        with pytest.raises(ValueError):
            mc_study(SimConfig(0.3, W, 100), reps, level)
