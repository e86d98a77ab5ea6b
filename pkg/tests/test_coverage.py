import pytest

from matchci.intervals.interval_methods import FixedIntervalMethod
from matchci.intervals.method_manager import IntervalManager
from matchci.models.match_models import CoverageTruth, SyntheticConfig
from matchci.simulation.coverage import run_coverage_experiment
from matchci.simulation.synthetic import calibrate_threshold
from matchci.utils.errors import InvalidInputError


@pytest.fixture
def tiny_config():
    return SyntheticConfig(g=6, m=3, dim=8, seed=2)


@pytest.fixture
def far_setup(tiny_config):
    calibration = calibrate_threshold(tiny_config, "FAR", 0.1, calibration_g=20, calibration_m=4)
    return calibration.threshold, CoverageTruth(metric="FAR", value=calibration.achieved_rate)


def _fixed_manager():
    return IntervalManager([FixedIntervalMethod("everything", 0.0, 1.0), FixedIntervalMethod("point", 0.5, 0.5)])


class TestCoverage:

    def test_degenerate_methods(self, tiny_config, far_setup):
        threshold, _ = far_setup
        truth = CoverageTruth(metric="FAR", value=0.01)
        report = run_coverage_experiment(tiny_config, threshold, truth, ["everything", "point"],
                                         replications=20, manager=_fixed_manager())
        assert report.method("everything").coverage == 1.0
        assert report.method("point").coverage == 0.0
        assert report.method("point").mean_width == 0.0
        assert report.method("everything").coverage_lower < 1.0

    def test_failures_are_not_misses(self, far_setup):
        threshold, truth = far_setup
        config = SyntheticConfig(g=2, m=3, dim=8, seed=2)
        report = run_coverage_experiment(config, threshold, truth, ["wilson", "naive-wilson"], replications=5)
        wilson = report.method("wilson")
        assert wilson.failures == 5
        assert wilson.replications == 0
        assert wilson.coverage is None
        assert wilson.last_error
        assert report.method("naive-wilson").replications == 5

    def test_independent_of_thread_count(self, tiny_config, far_setup):
        threshold, truth = far_setup
        kwargs = dict(replications=6, b=100, seed=9)
        one = run_coverage_experiment(tiny_config, threshold, truth, ["wilson", "vertex"], threads=1, **kwargs)
        many = run_coverage_experiment(tiny_config, threshold, truth, ["wilson", "vertex"], threads=3, **kwargs)
        assert one.model_dump() == many.model_dump()

    def test_replication_log(self, tiny_config, far_setup):
        threshold, truth = far_setup
        report = run_coverage_experiment(tiny_config, threshold, truth, ["wilson", "naive-wilson"],
                                         replications=4, keep_log=True)
        assert len(report.replication_log) == 8
        assert [r.replication for r in report.replication_log[:2]] == [0, 0]
        hits = sum(1 for r in report.replication_log if r.method == "wilson" and r.hit)
        assert report.method("wilson").hits == hits

    def test_manager_counts_runs(self, tiny_config, far_setup):
        threshold, truth = far_setup
        manager = IntervalManager()
        run_coverage_experiment(tiny_config, threshold, truth, ["naive-wilson"], replications=3, manager=manager)
        diagnostics = manager.get_diagnostics()
        assert set(diagnostics) == {"total_runs", "method_stats"}
        assert diagnostics["method_stats"]["naive-wilson"]["successful_runs"] == 3

    def test_rejects_bad_arguments(self, tiny_config, far_setup):
        threshold, truth = far_setup
        with pytest.raises(InvalidInputError):
            run_coverage_experiment(tiny_config, threshold, truth, ["wilson"], replications=0)
        with pytest.raises(InvalidInputError):
            run_coverage_experiment(tiny_config, threshold, truth, [], replications=2)
        with pytest.raises(InvalidInputError):
            run_coverage_experiment(tiny_config, threshold, truth, ["bayes"], replications=2)
