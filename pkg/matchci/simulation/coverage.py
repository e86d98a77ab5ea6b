"""Monte Carlo coverage of interval methods on synthetic data."""

import logging
from typing import List, Optional, Sequence

import numpy as np

from matchci.config.settings import COVERAGE_CONFIG, INTERVAL_CONFIG
from matchci.intervals.base_method import EvaluationContext
from matchci.intervals.method_manager import IntervalManager
from matchci.intervals.wilson import wilson_core
from matchci.models.match_models import (
    CoverageReport, CoverageTruth, MethodCoverage, ReplicationRecord, SyntheticConfig,
)
from matchci.simulation.synthetic import generate_synthetic
from matchci.utils.errors import InvalidInputError
from matchci.utils.parallel import ordered_map
from matchci.utils.rng import stream_rng

logger = logging.getLogger(__name__)


def _summarize(tag: str, records: List[ReplicationRecord]) -> MethodCoverage:
    done = [r for r in records if r.error is None]
    failed = [r for r in records if r.error is not None]
    hits = sum(1 for r in done if r.hit)
    summary = MethodCoverage(method=tag, replications=len(done), hits=hits, failures=len(failed),
                             last_error=failed[-1].error if failed else None)
    if done:
        summary.coverage = hits / len(done)
        summary.coverage_lower, summary.coverage_upper = wilson_core(summary.coverage, len(done),
                                                                     COVERAGE_CONFIG["ci_alpha"])
        summary.mean_width = float(np.mean([r.upper - r.lower for r in done]))
    else:
        logger.warning(f"{tag} failed in every replication: {summary.last_error}")
    return summary


def run_coverage_experiment(config: SyntheticConfig, threshold: float, truth: CoverageTruth,
                            methods: Sequence[str], alpha: Optional[float] = None,
                            replications: Optional[int] = None, b: Optional[int] = None,
                            seed: Optional[int] = None, threads: Optional[int] = 1,
                            manager: Optional[IntervalManager] = None, keep_log: bool = False) -> CoverageReport:
    """Generate ``replications`` datasets and score each method's interval against ``truth``.

    Replication r draws its data from the stream (seed, "replication", r) and its
    bootstrap weights from streams under the same prefix, so the report does not
    depend on ``threads``. A method that fails in a replication is counted as a
    failure for that method only.
    """
    replications = COVERAGE_CONFIG["replications"] if replications is None else replications
    if replications < 1:
        raise InvalidInputError(f"need at least one replication, got {replications}")
    if not methods:
        raise InvalidInputError("no interval methods selected")
    seed = config.seed if seed is None else seed
    alpha = INTERVAL_CONFIG["alpha"] if alpha is None else alpha
    manager = manager or IntervalManager()
    unknown = [tag for tag in methods if tag not in manager.methods]
    if unknown:
        raise InvalidInputError(f"unknown interval methods {unknown}")

    progress_step = max(1, replications // 10)

    def replicate(r: int) -> List[ReplicationRecord]:
        dataset = generate_synthetic(config, stream_rng(seed, "replication", r))
        context = EvaluationContext(dataset, threshold, alpha=alpha, b=b, seed=seed, threads=1,
                                    stream_key=("replication", r))
        records = []
        for tag in methods:
            try:
                result = manager.compute(tag, context, truth.metric)
                records.append(ReplicationRecord(replication=r, method=tag, lower=result.lower,
                                                 upper=result.upper, hit=result.contains(truth.value)))
            except Exception as e:
                logger.debug(f"Replication {r}: {tag} failed: {e}")
                records.append(ReplicationRecord(replication=r, method=tag, error=str(e)))
        if (r + 1) % progress_step == 0:
            logger.info(f"Coverage replication {r + 1}/{replications} done")
        return records

    per_replication = ordered_map(replicate, range(replications), threads)
    log = [record for records in per_replication for record in records]

    summaries = [_summarize(tag, [rec for rec in log if rec.method == tag]) for tag in methods]
    for s in summaries:
        if s.coverage is not None:
            logger.info(f"{s.method}: coverage {s.coverage:.3f} [{s.coverage_lower:.3f}, {s.coverage_upper:.3f}], "
                        f"mean width {s.mean_width:.4g}, failures {s.failures}")

    return CoverageReport(truth=truth, threshold=threshold, alpha=alpha, replications=replications,
                          seed=seed, config=config, methods=summaries,
                          replication_log=log if keep_log else None)
