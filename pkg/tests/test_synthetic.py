import numpy as np
import pytest
from pydantic import ValidationError

from matchci.data.dataset import genuine_scores
from matchci.models.match_models import SyntheticConfig
from matchci.simulation.synthetic import calibrate_threshold, generate_synthetic
from matchci.utils.errors import InvalidInputError
from matchci.utils.rng import stream_rng


class TestGenerator:

    def test_balanced_shape(self, small_config, small_dataset):
        assert small_dataset.g == small_config.g
        assert small_dataset.n_instances == small_config.g * small_config.m
        assert small_dataset.identities[:3] == ("1", "2", "3")
        assert small_dataset.is_balanced
        np.testing.assert_allclose(np.linalg.norm(small_dataset.embeddings, axis=1), 1.0)

    def test_seed_replay(self, small_config):
        a = generate_synthetic(small_config)
        b = generate_synthetic(small_config)
        c = generate_synthetic(small_config.model_copy(update={"seed": 4}))
        np.testing.assert_array_equal(a.scores, b.scores)
        assert not np.array_equal(a.scores, c.scores)

    def test_explicit_stream(self, small_config):
        a = generate_synthetic(small_config, stream_rng(1, "replication", 0))
        b = generate_synthetic(small_config, stream_rng(1, "replication", 1))
        assert not np.array_equal(a.scores, b.scores)

    def test_unbalanced_counts_in_range(self):
        dataset = generate_synthetic(SyntheticConfig(g=30, m_min=2, m_max=5, dim=4, seed=1))
        assert dataset.instance_counts.min() >= 2
        assert dataset.instance_counts.max() <= 5
        assert not dataset.is_balanced

    def test_noise_free_instances_coincide(self):
        dataset = generate_synthetic(SyntheticConfig(g=5, m=3, dim=6, noise_second_param=0.0))
        assert np.all(genuine_scores(dataset) == 0.0)

    def test_noise_parameter_modes(self):
        assert SyntheticConfig(g=2, noise_second_param=4.0).noise_sd == 2.0
        assert SyntheticConfig(g=2, noise_second_param=4.0, noise_mode="stddev").noise_sd == 4.0

    def test_instance_range_needs_both_ends(self):
        with pytest.raises(ValidationError):
            SyntheticConfig(g=5, m_min=2)
        with pytest.raises(ValidationError):
            SyntheticConfig(g=5, m_min=4, m_max=3)


class TestCalibration:

    def test_far_target_reached(self, small_config):
        result = calibrate_threshold(small_config, "FAR", 0.1, calibration_g=20, calibration_m=4)
        # C(80, 2) pairs minus 20 * 6 genuine
        assert result.n_scores == 3040
        assert result.achieved_rate == pytest.approx(0.1)
        assert result.exact

    def test_frr_target_reached(self, small_config):
        result = calibrate_threshold(small_config, "FRR", 0.05, calibration_g=20, calibration_m=4)
        assert result.n_scores == 120
        assert result.achieved_rate == pytest.approx(0.05)
        assert (result.calibration_g, result.calibration_m) == (20, 4)

    def test_boundary_targets(self, small_config):
        zero = calibrate_threshold(small_config, "FRR", 0.0, calibration_g=10, calibration_m=3)
        one = calibrate_threshold(small_config, "FAR", 1.0, calibration_g=10, calibration_m=3)
        assert zero.achieved_rate == 0.0
        assert one.achieved_rate == 1.0

    def test_replays_with_seed(self, small_config):
        a = calibrate_threshold(small_config, "FAR", 0.2, calibration_g=15, calibration_m=3)
        b = calibrate_threshold(small_config, "FAR", 0.2, calibration_g=15, calibration_m=3)
        assert a.threshold == b.threshold

    def test_calibration_sample_is_balanced(self):
        config = SyntheticConfig(g=8, m_min=2, m_max=6, dim=4)
        result = calibrate_threshold(config, "FRR", 0.1, calibration_g=10, calibration_m=3)
        assert result.n_scores == 30

    def test_rejects_bad_target(self, small_config):
        with pytest.raises(InvalidInputError):
            calibrate_threshold(small_config, "FAR", 1.5)
        with pytest.raises(InvalidInputError):
            calibrate_threshold(small_config, "EER", 0.1)
