import logging
from threading import Lock
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from matchci.config.settings import EXIT_CODES
from matchci.intervals.base_method import BaseIntervalMethod, EvaluationContext
from matchci.intervals.interval_methods import BootstrapIntervalMethod, WilsonIntervalMethod
from matchci.models.match_models import IntervalResult, Metric
from matchci.utils.errors import InvalidInputError, MatchCIError

logger = logging.getLogger(__name__)


def exit_code_for(error: Exception) -> int:
    if isinstance(error, MatchCIError):
        return error.exit_code
    if isinstance(error, (ValidationError, ValueError)):
        return EXIT_CODES["precondition"]
    return EXIT_CODES["resampling"]


class IntervalManager:
    def __init__(self, methods: Optional[Sequence[BaseIntervalMethod]] = None):
        """Register the built-in methods, plus any extra ones passed in"""
        self.methods: Dict[str, BaseIntervalMethod] = {}
        self.lock = Lock()
        self.diagnostics = {
            'total_runs': 0,
            'method_stats': {}
        }

        for method in (
            WilsonIntervalMethod("wilson", "adjusted"),
            WilsonIntervalMethod("naive-wilson", "naive"),
            BootstrapIntervalMethod("subsets", "subsets"),
            BootstrapIntervalMethod("two-level", "two_level"),
            BootstrapIntervalMethod("vertex", "vertex"),
            BootstrapIntervalMethod("don", "double_or_nothing"),
        ):
            self.register(method)
        for method in methods or ():
            self.register(method)

        logger.debug(f"Interval methods registered: {', '.join(self.methods)}")

    def register(self, method: BaseIntervalMethod):
        if method.tag in self.methods:
            logger.info(f"Replacing interval method '{method.tag}'")
        self.methods[method.tag] = method
        self.diagnostics['method_stats'][method.tag] = {
            'successful_runs': 0,
            'failed_runs': 0,
            'last_error': None
        }

    def compute(self, tag: str, context: EvaluationContext, metric: Metric) -> IntervalResult:
        """Run one method; raises on failure after recording it"""
        if tag not in self.methods:
            raise InvalidInputError(f"Unknown interval method '{tag}'")

        stats = self.diagnostics['method_stats'][tag]
        try:
            result = self.methods[tag].evaluate(context, metric)
        except Exception as e:
            with self.lock:
                stats['failed_runs'] += 1
                stats['last_error'] = str(e)
            raise

        with self.lock:
            stats['successful_runs'] += 1
        return result

    def compute_all(self, context: EvaluationContext, metric: Metric, tags: Sequence[str]) -> List[Dict[str, Any]]:
        """One entry per tag, in order; a failing method yields an error entry and the rest still run"""
        with self.lock:
            self.diagnostics['total_runs'] += 1

        entries = []
        for tag in tags:
            try:
                result = self.compute(tag, context, metric)
                entry = result.model_dump()
                entry['status'] = 'ok'
                entries.append(entry)
            except Exception as e:
                logger.error(f"Error computing {tag} interval for {metric}: {e}")
                entries.append({
                    'method': tag,
                    'metric': metric,
                    'status': 'error',
                    'error': str(e),
                    'exit_code': exit_code_for(e)
                })
        return entries

    def get_diagnostics(self) -> Dict[str, Any]:
        return {
            'total_runs': self.diagnostics['total_runs'],
            'method_stats': {tag: dict(stats) for tag, stats in self.diagnostics['method_stats'].items()}
        }
