import math

import numpy as np
import pytest

from matchci.data.dataset import build_dataset, impostor_scores
from matchci.models.match_models import SyntheticConfig
from matchci.roc.roc_analysis import (
    _SortedScores, empirical_roc, roc_interval_bootstrap, roc_interval_parametric, threshold_for_far,
)
from matchci.simulation.synthetic import generate_synthetic
from matchci.utils.errors import InvalidInputError
from matchci.utils.rng import stream_rng


@pytest.fixture
def two_identity_dataset():
    # pairs in order: (1a,1b) gen, four impostors, (2a,2b) gen
    return build_dataset(["1", "1", "2", "2"], scores=np.array([0.1, 0.5, 0.6, 0.7, 0.8, 0.3]))


class TestEmpiricalRoc:

    def test_sentinels_and_orientation(self, two_identity_dataset):
        roc = empirical_roc(two_identity_dataset)
        assert roc.thresholds[0] == -math.inf and roc.thresholds[-1] == math.inf
        assert (roc.far_at[0], roc.frr_at[0]) == (0.0, 1.0)
        assert (roc.far_at[-1], roc.frr_at[-1]) == (1.0, 0.0)
        assert roc.n_genuine == 2 and roc.n_impostor == 4

    def test_rates_at_scores(self, two_identity_dataset):
        roc = empirical_roc(two_identity_dataset)
        at = dict(zip(roc.thresholds, zip(roc.far_at, roc.frr_at)))
        assert at[0.3] == (0.0, 0.5)
        assert at[0.5] == (0.0, 0.0)
        assert at[0.7] == (0.5, 0.0)

    def test_monotone_on_synthetic_data(self, small_dataset):
        roc = empirical_roc(small_dataset)
        assert np.all(np.diff(roc.far_at) >= 0)
        assert np.all(np.diff(roc.frr_at) <= 0)

    def test_needs_genuine_scores(self):
        dataset = build_dataset(["1", "2", "3"], scores=np.array([0.1, 0.2, 0.3]))
        with pytest.raises(InvalidInputError):
            empirical_roc(dataset)


class TestThresholdForFar:

    def test_largest_threshold_within_target(self, two_identity_dataset):
        roc = empirical_roc(two_identity_dataset)
        assert threshold_for_far(roc, 0.0) == 0.5
        assert threshold_for_far(roc, 0.5) == 0.7
        assert threshold_for_far(roc, 0.6) == 0.7
        assert threshold_for_far(roc, 1.0) == math.inf

    def test_zero_target_is_smallest_impostor_score(self, two_identity_dataset, small_dataset):
        for dataset in (two_identity_dataset, small_dataset):
            roc = empirical_roc(dataset)
            t = threshold_for_far(roc, 0.0)
            assert t == impostor_scores(dataset).min()
            assert roc.far_at[roc.thresholds.index(t)] == 0.0
            assert roc.far_at[roc.thresholds.index(t) + 1] > 0.0

    def test_rejects_target_outside_unit_interval(self, two_identity_dataset):
        with pytest.raises(InvalidInputError):
            threshold_for_far(empirical_roc(two_identity_dataset), 1.5)


class TestParametricInterval:

    def test_band_contains_interval_at_operating_point(self, small_dataset):
        result = roc_interval_parametric(small_dataset, 0.1)
        interval = result.interval
        diag = interval.diagnostics
        assert result.method == "parametric_nested"
        assert interval.method == "roc-parametric"
        assert interval.metric == "FRR"
        assert diag["threshold_lower"] <= result.threshold_used <= diag["threshold_upper"]
        low, high = diag["frr_at_point_interval"]
        assert interval.lower <= low and high <= interval.upper
        assert interval.lower <= interval.point <= interval.upper

    def test_alpha_far_defaults_to_alpha(self, small_dataset):
        assert roc_interval_parametric(small_dataset, 0.1, alpha=0.1).alpha_far == 0.1
        assert roc_interval_parametric(small_dataset, 0.1, alpha=0.1, alpha_far=0.01).alpha_far == 0.01

    def test_smaller_alpha_far_widens_band(self, small_dataset):
        narrow = roc_interval_parametric(small_dataset, 0.1, alpha_far=0.2).interval
        wide = roc_interval_parametric(small_dataset, 0.1, alpha_far=0.01).interval
        assert wide.lower <= narrow.lower
        assert wide.upper >= narrow.upper


class TestBootstrapInterval:

    def test_unit_weights_give_empirical_frr(self, small_dataset):
        roc = empirical_roc(small_dataset)
        scores = _SortedScores(small_dataset)
        for target in (0.01, 0.1, 0.3):
            t0 = threshold_for_far(roc, target)
            expected = roc.frr_at[roc.thresholds.index(t0)]
            assert scores.frr_at_target(np.ones(small_dataset.g), "vertex", target) == pytest.approx(expected)

    def test_seed_replay_and_threads(self, small_dataset):
        one = roc_interval_bootstrap(small_dataset, 0.1, b=200, seed=4, threads=1)
        again = roc_interval_bootstrap(small_dataset, 0.1, b=200, seed=4, threads=3)
        assert one.interval.model_dump() == again.interval.model_dump()
        assert one.method == "bootstrap_vertical"
        assert one.interval.method == "roc-bootstrap"
        assert one.interval.diagnostics["target_far"] == 0.1

    @pytest.mark.parametrize("scheme", ["subsets", "vertex", "double_or_nothing"])
    def test_schemes(self, small_dataset, scheme):
        result = roc_interval_bootstrap(small_dataset, 0.2, scheme=scheme, b=100, seed=1)
        assert 0.0 <= result.interval.lower <= result.interval.upper <= 1.0
        assert result.interval.diagnostics["scheme"] == scheme

    def test_rejects_two_level_and_tiny_b(self, small_dataset):
        with pytest.raises(InvalidInputError):
            roc_interval_bootstrap(small_dataset, 0.1, scheme="two_level", b=100)
        with pytest.raises(InvalidInputError):
            roc_interval_bootstrap(small_dataset, 0.1, b=1)


@pytest.mark.slow
class TestRocMonteCarlo:

    @pytest.fixture(scope="class")
    def replicated(self):
        config = SyntheticConfig(g=50, m=5, seed=31)
        reference = generate_synthetic(config.model_copy(update={"g": 100, "m": 10}), stream_rng(config.seed, "truth"))
        roc = empirical_roc(reference)
        truth = roc.frr_at[roc.thresholds.index(threshold_for_far(roc, 1e-2))]
        datasets = [generate_synthetic(config, stream_rng(config.seed, "replication", r)) for r in range(200)]
        return truth, datasets

    def test_parametric_contains_plug_in_estimate(self, replicated):
        _, datasets = replicated
        inside = 0
        for dataset in datasets:
            roc = empirical_roc(dataset)
            point = roc.frr_at[roc.thresholds.index(threshold_for_far(roc, 1e-2))]
            interval = roc_interval_parametric(dataset, 1e-2, alpha=0.05, alpha_far=0.05).interval
            inside += interval.contains(point)
        assert inside / len(datasets) >= 0.99

    def test_bootstrap_coverage_close_to_parametric(self, replicated):
        truth, datasets = replicated
        parametric = bootstrap = 0
        for r, dataset in enumerate(datasets):
            parametric += roc_interval_parametric(dataset, 1e-2).interval.contains(truth)
            bootstrap += roc_interval_bootstrap(dataset, 1e-2, b=500, seed=r).interval.contains(truth)
        assert abs(parametric - bootstrap) / len(datasets) <= 0.05
