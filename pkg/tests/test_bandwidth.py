import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covroc.bandwidth import (
    BandwidthSearch,
    default_search,
    loo_cv_scores,
    select_bandwidth,
)
from covroc.errors import InvalidInputError, SelectionError
from covroc.estimators import KernelSpec, PairedSample
from oracles import loo_cv_loop


def _linear(seed, n=200, noise=0.1):
    r = np.random.default_rng(seed)
    x = r.uniform(0, 1, n)
    return PairedSample(x, x + r.normal(0, noise, n))


class TestSearch:
    def test_default_grid_shape(self):
        x = np.linspace(0, 3, 50)
        s = default_search(x)
        sd = np.std(x, ddof=1)
        assert len(s.candidates) == 25
        assert s.candidates[0] == pytest.approx(0.05 * sd)
        assert s.candidates[-1] == pytest.approx(2.0 * sd)
        np.testing.assert_allclose(np.diff(np.log(s.candidates)), np.log(40) / 24)

    @pytest.mark.parametrize("bad", [[0.1, 0.2, 0.3, 0.4], [0.1, 0.3, 0.2, 0.4, 0.5],
                                     [0.0, 0.1, 0.2, 0.3, 0.4], [0.1, 0.1, 0.2, 0.3, 0.4]])
    def test_rejects_bad_candidates(self, bad):
        with pytest.raises(InvalidInputError):
            BandwidthSearch(np.array(bad))

    def test_constant_covariate(self):
        with pytest.raises(SelectionError):
            default_search(np.full(20, 3.0))


class TestSelect:
    def test_linear_data_interior(self):
        for seed in range(5):
            sample = _linear(seed)
            search = default_search(sample.covariate)
            g = select_bandwidth(sample, search=search)
            assert 0.01 < g < 0.5
            assert search.candidates[0] < g < search.candidates[-1]

    def test_pure_noise_prefers_oversmoothing(self):
        # chance structure occasionally wins, so check the typical draw
        top = []
        for seed in range(40):
            r = np.random.default_rng(100 + seed)
            x = r.uniform(0, 1, 200)
            sample = PairedSample(x, r.normal(size=200))
            search = default_search(x)
            top.append(select_bandwidth(sample, search=search) == search.candidates[-1])
        assert np.mean(top) >= 0.6

    @pytest.mark.xfail(strict=True, reason="a duplicated point's twin survives leave-one-out")
    def test_duplicated_dataset_same_choice(self):
        sample = _linear(0)
        search = default_search(sample.covariate)
        twice = PairedSample(np.repeat(sample.covariate, 2), np.repeat(sample.marker, 2))
        assert select_bandwidth(twice, search=search) == pytest.approx(
            select_bandwidth(sample, search=search), rel=0.5)

    def test_matches_loop_oracle(self, rng):
        x = rng.uniform(0, 2, 40)
        sample = PairedSample(x, np.sin(2 * x) + rng.normal(0, 0.3, 40))
        search = default_search(x)
        scores = loo_cv_scores(sample, search.candidates, KernelSpec())
        oracle = [loo_cv_loop(x, sample.marker, g) for g in search.candidates]
        np.testing.assert_allclose(scores, oracle, rtol=1e-10)
        assert select_bandwidth(sample, search=search) == search.candidates[int(np.argmin(oracle))]

    def test_too_small(self, rng):
        with pytest.raises(InvalidInputError):
            select_bandwidth(PairedSample(rng.uniform(size=9), rng.normal(size=9)))

    def test_all_degenerate(self):
        # compact kernel narrower than every gap: no point has a neighbour
        x = np.arange(12.0)
        sample = PairedSample(x, np.sin(x))
        search = BandwidthSearch(np.array([0.1, 0.2, 0.3, 0.4, 0.5]))
        with pytest.raises(SelectionError):
            select_bandwidth(sample, KernelSpec("epanechnikov"), search)

    def test_epanechnikov(self):
        g = select_bandwidth(_linear(1), KernelSpec("epanechnikov"))
        assert g in default_search(_linear(1).covariate).candidates


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(10, 60))
def test_argmin_member_and_deterministic(seed, n):
    r = np.random.default_rng(seed)
    x = r.uniform(-1, 1, n)
    sample = PairedSample(x, x**2 + r.normal(0, 0.2, n))
    search = default_search(x)
    g = select_bandwidth(sample, search=search)
    assert g in search.candidates
    scores = loo_cv_scores(sample, search.candidates, KernelSpec())
    assert scores[list(search.candidates).index(g)] <= scores.min()
    assert select_bandwidth(sample, search=search) == g
