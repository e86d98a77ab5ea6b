import logging
import time
from abc import ABC, abstractmethod
from functools import cached_property
from typing import Optional

from matchci.config.settings import BOOTSTRAP_CONFIG, INTERVAL_CONFIG
from matchci.data.dataset import aggregate_at_threshold, build_outcome_store
from matchci.models.match_models import IntervalResult, MatchDataset, Metric, OutcomeStore, PairAggregates

logger = logging.getLogger(__name__)


class EvaluationContext:
    """Everything an interval method needs for one dataset at one threshold."""

    def __init__(self, dataset: MatchDataset, threshold: float, alpha: Optional[float] = None,
                 b: Optional[int] = None, seed: int = 0, threads: Optional[int] = 1,
                 stream_key: tuple = (), frr_mode: Optional[str] = None):
        self.dataset = dataset
        self.threshold = threshold
        self.alpha = INTERVAL_CONFIG["alpha"] if alpha is None else alpha
        self.b = BOOTSTRAP_CONFIG["default_b"] if b is None else b
        self.seed = seed
        self.threads = threads
        self.stream_key = stream_key
        self.frr_mode = frr_mode

    @cached_property
    def agg(self) -> PairAggregates:
        return aggregate_at_threshold(self.dataset, self.threshold)

    @cached_property
    def store(self) -> OutcomeStore:
        return build_outcome_store(self.agg)


class BaseIntervalMethod(ABC):
    def __init__(self, tag: str):
        self.tag = tag

    @abstractmethod
    def compute_interval(self, context: EvaluationContext, metric: Metric) -> IntervalResult:
        """Build the interval for ``metric``"""
        pass

    def evaluate(self, context: EvaluationContext, metric: Metric) -> IntervalResult:
        """Compute and return the interval, logging how long it took"""
        started = time.perf_counter()
        try:
            result = self.compute_interval(context, metric)
        except Exception as e:
            logger.debug(f"{self.tag} failed for {metric}: {e}")
            raise
        logger.debug(f"{self.tag} {metric} [{result.lower:.6g}, {result.upper:.6g}] "
                     f"in {time.perf_counter() - started:.3f}s")
        return result
