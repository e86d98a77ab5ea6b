import logging

from matchci.intervals.base_method import BaseIntervalMethod, EvaluationContext
from matchci.intervals.wilson import wilson_interval
from matchci.models.match_models import IntervalResult, Metric
from matchci.resampling.bootstrap import bootstrap_distribution, percentile_interval

logger = logging.getLogger(__name__)


class WilsonIntervalMethod(BaseIntervalMethod):
    def __init__(self, tag: str, mode: str):
        super().__init__(tag)
        self.mode = mode

    def compute_interval(self, context: EvaluationContext, metric: Metric) -> IntervalResult:
        result = wilson_interval(metric, context.agg, self.mode, context.alpha, context.frr_mode)
        result.method = self.tag
        return result


class BootstrapIntervalMethod(BaseIntervalMethod):
    def __init__(self, tag: str, scheme: str):
        super().__init__(tag)
        self.scheme = scheme

    def compute_interval(self, context: EvaluationContext, metric: Metric) -> IntervalResult:
        store = context.store if self.scheme == "two_level" else None
        dist = bootstrap_distribution(context.agg, self.scheme, metric, context.b, context.seed,
                                      store=store, threads=context.threads, stream_key=context.stream_key)
        result = percentile_interval(dist, context.alpha, method=self.tag)
        result.diagnostics["threshold"] = context.threshold
        return result


class FixedIntervalMethod(BaseIntervalMethod):
    """Returns the same interval whatever the data; a reference point for coverage runs."""

    def __init__(self, tag: str, lower: float, upper: float):
        super().__init__(tag)
        self.lower = lower
        self.upper = upper

    def compute_interval(self, context: EvaluationContext, metric: Metric) -> IntervalResult:
        return IntervalResult(metric=metric, method=self.tag, lower=self.lower, upper=self.upper,
                              point=(self.lower + self.upper) / 2.0, alpha=context.alpha)
