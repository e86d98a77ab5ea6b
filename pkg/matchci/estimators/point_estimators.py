import logging
from typing import Optional

import numpy as np

from matchci.models.match_models import ErrorEstimate, Metric, PairAggregates, Setting
from matchci.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)


def _unit(value: float) -> float:
    return float(min(max(value, 0.0), 1.0))


def off_diagonal(matrix: np.ndarray) -> np.ndarray:
    out = np.array(matrix, dtype=float)
    np.fill_diagonal(out, 0.0)
    return out


def naive_pair_count(agg: PairAggregates, metric: Metric) -> int:
    """Distinct comparisons behind the estimate: sum_i M_i(M_i-1)/2 for FRR, sum_{i<j} M_i M_j for FAR."""
    m = [int(x) for x in agg.instance_counts]
    if metric == "FRR":
        return sum(x * (x - 1) // 2 for x in m)
    total = sum(m)
    return (total * total - sum(x * x for x in m)) // 2


def _require_balanced(agg: PairAggregates) -> None:
    if not agg.is_balanced:
        raise InvalidInputError("balanced estimator called on identities with unequal instance counts")


def estimate_frr_balanced(agg: PairAggregates) -> ErrorEstimate:
    if agg.g < 1:
        raise InvalidInputError("empty dataset")
    _require_balanced(agg)
    if agg.instance_counts[0] < 2:
        raise InvalidInputError("FRR needs at least 2 instances per identity")
    value = float(np.mean(np.diag(agg.y_bar)))
    return ErrorEstimate(metric="FRR", value=_unit(value),
                         n_effective_naive=naive_pair_count(agg, "FRR"), setting="balanced")


def estimate_far_balanced(agg: PairAggregates) -> ErrorEstimate:
    g = agg.g
    if g < 2:
        raise InvalidInputError(f"FAR needs at least 2 identities, got {g}")
    _require_balanced(agg)
    value = off_diagonal(agg.y_bar).sum() / (g * (g - 1))
    return ErrorEstimate(metric="FAR", value=_unit(value),
                         n_effective_naive=naive_pair_count(agg, "FAR"), setting="balanced")


def estimate_frr_unbalanced(agg: PairAggregates) -> ErrorEstimate:
    m_tilde = agg.m_tilde.astype(float)
    weight = m_tilde.sum()
    if weight <= 0:
        raise InvalidInputError("no identity has 2 or more instances; FRR is undefined")
    value = float(np.dot(m_tilde, np.diag(agg.y_bar)) / weight)
    return ErrorEstimate(metric="FRR", value=_unit(value),
                         n_effective_naive=naive_pair_count(agg, "FRR"), setting="unbalanced")


def estimate_far_unbalanced(agg: PairAggregates) -> ErrorEstimate:
    if agg.g < 2:
        raise InvalidInputError(f"FAR needs at least 2 identities, got {agg.g}")
    weights = off_diagonal(agg.counts)
    value = float((weights * agg.y_bar).sum() / weights.sum())
    return ErrorEstimate(metric="FAR", value=_unit(value),
                         n_effective_naive=naive_pair_count(agg, "FAR"), setting="unbalanced")


def estimate(agg: PairAggregates, metric: Metric, setting: Optional[Setting] = None) -> ErrorEstimate:
    """Point estimate using the balanced formula when counts are equal, the weighted one otherwise."""
    setting = setting or agg.setting
    if metric == "FRR":
        return estimate_frr_balanced(agg) if setting == "balanced" else estimate_frr_unbalanced(agg)
    return estimate_far_balanced(agg) if setting == "balanced" else estimate_far_unbalanced(agg)
