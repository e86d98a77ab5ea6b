import numpy as np
import pytest

from conftest import random_aggregates
from matchci.estimators.point_estimators import estimate
from matchci.estimators.variance import (
    cov_y12_y13_plugin, leave_one_out_far, var_far_jackknife, var_far_plugin, var_far_unbalanced,
    var_frr_plugin, var_frr_unbalanced, var_y12_plugin, variance_for,
)
from matchci.models.match_models import PairAggregates
from matchci.utils.errors import InvalidInputError


def _brute_cov(agg, far):
    g = agg.g
    total, n = 0.0, 0
    for i in range(g):
        for j in range(g):
            for k in range(g):
                if len({i, j, k}) == 3:
                    total += (agg.y_bar[i, j] - far) * (agg.y_bar[i, k] - far)
                    n += 1
    return total / n


class TestPluginVariance:

    def test_frr_plugin_is_population_variance_of_diagonal(self):
        agg = PairAggregates.from_matrix(np.diag([0.1, 0.3, 0.2, 0.0]), 3)
        frr = estimate(agg, "FRR")
        assert var_frr_plugin(agg, frr).scaled_variance == pytest.approx(np.var([0.1, 0.3, 0.2, 0.0]))

    def test_covariance_matches_triple_enumeration(self, rng):
        agg = random_aggregates(rng, 6)
        far = estimate(agg, "FAR")
        assert cov_y12_y13_plugin(agg, far) == pytest.approx(_brute_cov(agg, far.value), abs=1e-14)

    def test_far_plugin_composition(self, rng):
        agg = random_aggregates(rng, 7)
        far = estimate(agg, "FAR")
        v = var_far_plugin(agg, far)
        expected = 2 / 6 * var_y12_plugin(agg, far) + 4 * 5 / 6 * cov_y12_y13_plugin(agg, far)
        assert v.raw_variance == pytest.approx(expected)
        assert set(v.components) == {"var_y12", "cov_y12_y13"}

    def test_negative_estimate_is_clamped(self):
        # a perfect matching of confused identities makes the covariance term dominate
        y = np.zeros((4, 4))
        y[0, 1] = y[1, 0] = y[2, 3] = y[3, 2] = 1.0
        agg = PairAggregates.from_matrix(y, 2)
        v = var_far_plugin(agg, estimate(agg, "FAR"))
        assert v.raw_variance == pytest.approx(-4 / 27)
        assert v.clamped
        assert v.scaled_variance == 0.0

    def test_far_plugin_needs_three_identities(self):
        agg = PairAggregates.from_matrix([[0.0, 0.5], [0.5, 0.0]], 2)
        with pytest.raises(InvalidInputError):
            var_far_plugin(agg, estimate(agg, "FAR"))


class TestJackknife:

    def test_leave_one_out_values(self, rng):
        agg = random_aggregates(rng, 5)
        loo = leave_one_out_far(agg)
        keep = [1, 2, 3, 4]
        sub = PairAggregates.from_matrix(agg.y_bar[np.ix_(keep, keep)], 3)
        assert loo[0] == pytest.approx(estimate(sub, "FAR").value)

    def test_jackknife_equals_plugin(self, rng):
        for _ in range(100):
            g = int(rng.integers(3, 31))
            agg = random_aggregates(rng, g)
            far = estimate(agg, "FAR")
            plugin = var_far_plugin(agg, far).raw_variance
            jackknife = var_far_jackknife(agg, far).raw_variance
            assert abs(plugin - jackknife) / max(abs(plugin), 1e-12) < 1e-10


class TestUnbalancedVariance:

    def test_reduces_to_plugin_with_equal_counts(self, rng):
        for _ in range(50):
            g = int(rng.integers(3, 20))
            agg = random_aggregates(rng, g, m=4)
            frr_b = estimate(agg, "FRR", "balanced")
            far_b = estimate(agg, "FAR", "balanced")
            frr_u = estimate(agg, "FRR", "unbalanced")
            far_u = estimate(agg, "FAR", "unbalanced")
            assert frr_u.value == pytest.approx(frr_b.value, abs=1e-12)
            assert far_u.value == pytest.approx(far_b.value, abs=1e-12)

            plugin_frr = var_frr_plugin(agg, frr_b).raw_variance
            for mode in ("delta_independent", "delta_full"):
                assert var_frr_unbalanced(agg, frr_u, mode).raw_variance == pytest.approx(plugin_frr, abs=1e-12)
            assert var_far_unbalanced(agg, far_u).raw_variance == pytest.approx(
                var_far_plugin(agg, far_b).raw_variance, abs=1e-12)

    def test_modes_differ_with_unequal_counts(self, rng):
        y = rng.random((5, 5))
        agg = PairAggregates.from_matrix((y + y.T) / 2, [2, 3, 5, 2, 4])
        frr = estimate(agg, "FRR")
        independent = var_frr_unbalanced(agg, frr, "delta_independent")
        full = var_frr_unbalanced(agg, frr, "delta_full")
        assert independent.mode == "delta_independent"
        assert full.mode == "delta_full"
        assert independent.raw_variance != pytest.approx(full.raw_variance)

    def test_unknown_mode(self, rng):
        agg = random_aggregates(rng, 4)
        with pytest.raises(InvalidInputError):
            var_frr_unbalanced(agg, estimate(agg, "FRR"), "bogus")

    def test_dispatch(self, rng):
        y = rng.random((4, 4))
        agg = PairAggregates.from_matrix((y + y.T) / 2, [2, 3, 2, 3])
        assert variance_for(agg, estimate(agg, "FAR")).estimator == "unbalanced_delta"
        balanced = random_aggregates(rng, 4)
        assert variance_for(balanced, estimate(balanced, "FAR")).estimator == "plugin"
