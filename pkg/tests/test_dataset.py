import numpy as np
import pytest
from pydantic import ValidationError

from matchci.data.dataset import (
    aggregate_at_threshold, aggregate_pairs, build_dataset, build_outcome_store, check_complete,
    genuine_scores, impostor_scores, outcome_values, threshold_outcomes,
)
from matchci.models.match_models import ComparisonOutcome, PairAggregates
from matchci.utils.errors import DataError, InvalidInputError


def _embedded(rng, identities, dim=4):
    return build_dataset(identities, embeddings=rng.normal(size=(len(identities), dim)))


class TestBuildDataset:
    """Grouping instances by identity."""

    def test_groups_by_first_appearance(self):
        dataset = build_dataset(["b", "a", "b"], scores=np.array([0.5, 0.1, 0.7]))

        assert dataset.identities == ("b", "a")
        assert dataset.instance_counts.tolist() == [2, 1]
        # (b1, b2), (b1, a1), (b2, a1) after regrouping
        assert dataset.scores.tolist() == [0.1, 0.5, 0.7]
        assert not dataset.is_balanced

    def test_default_instance_labels_count_within_identity(self):
        dataset = build_dataset(["x", "y", "x", "y"], scores=np.zeros(6))
        assert dataset.instance_labels == ("1", "2", "1", "2")
        assert dataset.instance_index.tolist() == [1, 2, 1, 2]

    def test_embeddings_give_pdist_scores(self, rng):
        x = rng.normal(size=(4, 3))
        dataset = build_dataset(["1", "1", "2", "2"], embeddings=x)
        assert dataset.scores[0] == pytest.approx(np.linalg.norm(x[0] - x[1]))
        assert dataset.genuine_mask.tolist() == [True, False, False, False, False, True]

    def test_cosine_dissimilarity(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]])
        dataset = build_dataset(["1", "2", "3"], embeddings=x, dissimilarity="cosine")
        assert dataset.scores.tolist() == pytest.approx([1.0, 0.0, 1.0])

    def test_rejects_both_or_neither_source(self):
        with pytest.raises(InvalidInputError):
            build_dataset(["1", "2"])
        with pytest.raises(InvalidInputError):
            build_dataset(["1", "2"], scores=np.zeros(1), embeddings=np.zeros((2, 2)))

    def test_rejects_wrong_score_length(self):
        with pytest.raises(InvalidInputError):
            build_dataset(["1", "2", "3"], scores=np.zeros(2))


class TestOutcomes:
    """Thresholding scores into error indicators."""

    def test_genuine_errs_at_threshold_and_impostor_below(self):
        # pairs: (1a,1b) genuine 0.5, (1a,2) impostor 0.4, (1b,2) impostor 0.5
        dataset = build_dataset(["1", "1", "2"], scores=np.array([0.5, 0.4, 0.5]))
        assert outcome_values(dataset, 0.5).tolist() == [1, 1, 0]

    def test_threshold_outcomes_stream_matches_vector(self, rng):
        dataset = _embedded(rng, ["1", "1", "2", "2", "2", "3"])
        streamed = [o.value for o in threshold_outcomes(dataset, 2.0)]
        assert streamed == outcome_values(dataset, 2.0).tolist()

    def test_no_self_pairs(self, rng):
        dataset = _embedded(rng, ["1", "1", "2"])
        assert all(o.pair[0] != o.pair[1] for o in threshold_outcomes(dataset, 1.0))

    def test_self_comparison_rejected(self):
        with pytest.raises(ValidationError):
            ComparisonOutcome(identity_a=0, instance_a=1, identity_b=0, instance_b=1, value=0)

    def test_missing_pair_is_a_data_error(self):
        dataset = build_dataset(["1", "1", "2"], scores=np.array([0.1, np.nan, 0.8]))
        with pytest.raises(DataError, match="missing score"):
            check_complete(dataset)
        with pytest.raises(DataError):
            aggregate_at_threshold(dataset, 0.5)
        with pytest.raises(DataError):
            list(threshold_outcomes(dataset, 0.5))


class TestAggregation:
    """Identity-level means."""

    def test_streamed_and_vectorized_aggregation_agree(self, rng):
        dataset = _embedded(rng, ["1"] * 3 + ["2"] * 2 + ["3"] * 4 + ["4"])
        fast = aggregate_at_threshold(dataset, 2.5)
        slow = aggregate_pairs(threshold_outcomes(dataset, 2.5), dataset, 2.5)
        np.testing.assert_allclose(fast.y_bar, slow.y_bar, atol=1e-15)
        assert np.array_equal(fast.counts, slow.counts)

    def test_within_identity_mean_over_ordered_pairs(self):
        # identity 1 has 3 instances: pairs scored 0.9, 0.1, 0.9 -> two errors at t=0.5
        dataset = build_dataset(["1", "1", "1", "2"], scores=np.array([0.9, 0.1, 0.8, 0.9, 0.8, 0.8]))
        agg = aggregate_at_threshold(dataset, 0.5)
        assert agg.counts[0, 0] == 6
        assert agg.y_bar[0, 0] == pytest.approx(4 / 6)
        assert agg.y_bar[0, 1] == agg.y_bar[1, 0] == 0.0

    def test_genuine_outcome_on_single_instance_identity(self, rng):
        dataset = _embedded(rng, ["1", "1", "2"])
        outcome = ComparisonOutcome(identity_a=1, instance_a=1, identity_b=1, instance_b=2, value=1)
        with pytest.raises(InvalidInputError):
            aggregate_pairs([outcome], dataset)

    def test_outcome_outside_dataset(self, rng):
        dataset = _embedded(rng, ["1", "2"])
        outcome = ComparisonOutcome(identity_a=0, instance_a=1, identity_b=5, instance_b=1, value=0)
        with pytest.raises(DataError):
            aggregate_pairs([outcome], dataset)

    def test_aggregates_reject_asymmetric_matrix(self):
        with pytest.raises(ValidationError):
            PairAggregates.from_matrix([[0.0, 0.2], [0.3, 0.0]], 2)

    def test_outcome_store_tallies(self, rng):
        dataset = _embedded(rng, ["1"] * 3 + ["2"] * 2 + ["3"] * 3)
        values = outcome_values(dataset, 2.0)
        store = build_outcome_store(aggregate_at_threshold(dataset, 2.0))
        genuine = dataset.genuine_mask

        assert store.within_total.tolist() == [3, 1, 3]
        assert store.within_ones.sum() == values[genuine].sum()
        # every impostor comparison is tallied from both sides
        assert store.cross_ones.sum() == 2 * values[~genuine].sum()
        assert store.cross_total.tolist() == [15, 12, 15]

    def test_score_populations(self, rng):
        dataset = _embedded(rng, ["1", "1", "2", "2"])
        assert len(genuine_scores(dataset)) == 2
        assert len(impostor_scores(dataset)) == 4
