"""
Empirical ROC and pointwise confidence intervals for FRR at a target FAR.

With dissimilarity scores, FAR(t) = #{impostor s < t} / n_imp is nondecreasing
in t and FRR(t) = #{genuine s >= t} / n_gen is nonincreasing; the -inf sentinel
has FAR 0 and FRR 1, the +inf sentinel FAR 1 and FRR 0.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from matchci.config.settings import BOOTSTRAP_CONFIG, INTERVAL_CONFIG, ROC_CONFIG
from matchci.data.dataset import aggregate_at_threshold, genuine_scores, impostor_scores
from matchci.intervals.wilson import wilson_interval
from matchci.models.match_models import (
    BootstrapDistribution, EmpiricalRoc, IntervalResult, MatchDataset, RocPointInterval, Scheme,
)
from matchci.resampling.bootstrap import _draw_block, _weight_kind, percentile_interval
from matchci.utils.errors import InvalidInputError, ResamplingError
from matchci.utils.parallel import ordered_map
from matchci.utils.rng import stream_rng

logger = logging.getLogger(__name__)


def _populations(dataset: MatchDataset) -> Tuple[np.ndarray, np.ndarray]:
    gen = genuine_scores(dataset)
    imp = impostor_scores(dataset)
    if len(gen) == 0 or len(imp) == 0:
        raise InvalidInputError("ROC needs both genuine and impostor scores")
    return gen, imp


def empirical_roc(dataset: MatchDataset) -> EmpiricalRoc:
    gen, imp = _populations(dataset)
    gen_sorted, imp_sorted = np.sort(gen), np.sort(imp)
    thresholds = np.concatenate(([-np.inf], np.unique(np.concatenate((gen, imp))), [np.inf]))
    far = np.searchsorted(imp_sorted, thresholds, side="left") / len(imp)
    frr = 1.0 - np.searchsorted(gen_sorted, thresholds, side="left") / len(gen)
    return EmpiricalRoc(thresholds=thresholds.tolist(), frr_at=frr.tolist(), far_at=far.tolist(),
                        n_genuine=len(gen), n_impostor=len(imp))


def threshold_for_far(roc: EmpiricalRoc, target: float) -> float:
    """Largest ROC threshold whose empirical FAR does not exceed ``target``.

    For target 0 this is the smallest impostor score itself: impostors err only
    when s < t, so no impostor errs there and any threshold below it gives the
    same zero FAR.
    """
    if not 0.0 <= target <= 1.0:
        raise InvalidInputError(f"target FAR must lie in [0, 1], got {target}")
    far = np.asarray(roc.far_at)
    index = int(np.searchsorted(far, target + ROC_CONFIG["far_tolerance"], side="right")) - 1
    return roc.thresholds[max(index, 0)]


def _frr_candidates(gen: np.ndarray, t_low: float, t_high: float, t_point: float) -> List[float]:
    """Thresholds covering every distinct FRR state on [t_low, t_high]."""
    inside = gen[(gen > t_low) & (gen < t_high)]
    return sorted(set([t_low, t_point, t_high]) | set(np.unique(inside).tolist()))


def roc_interval_parametric(dataset: MatchDataset, target_far: float, alpha: Optional[float] = None,
                            alpha_far: Optional[float] = None) -> RocPointInterval:
    """Nested-interval FRR@FAR band.

    A 1 - alpha_far Wilson interval for FAR at the operating threshold is mapped
    back to thresholds t_lb <= t0 <= t_ub; the result spans every 1 - alpha
    Wilson FRR interval on that threshold band.
    """
    alpha = INTERVAL_CONFIG["alpha"] if alpha is None else alpha
    if alpha_far is None:
        alpha_far = INTERVAL_CONFIG["alpha_far"] or alpha
    roc = empirical_roc(dataset)
    gen, _ = _populations(dataset)

    t0 = threshold_for_far(roc, target_far)
    far_interval = wilson_interval("FAR", aggregate_at_threshold(dataset, t0), "adjusted", alpha_far)
    t_lb = threshold_for_far(roc, far_interval.lower)
    t_ub = threshold_for_far(roc, far_interval.upper)

    frr_intervals = [wilson_interval("FRR", aggregate_at_threshold(dataset, t), "adjusted", alpha)
                     for t in _frr_candidates(gen, t_lb, t_ub, t0)]
    at_point = next(r for r in frr_intervals if r.diagnostics["threshold"] == t0)

    lower = min(r.lower for r in frr_intervals)
    upper = max(r.upper for r in frr_intervals)
    diagnostics = {
        "far_interval": [far_interval.lower, far_interval.upper],
        "far_point": far_interval.point,
        "threshold_lower": t_lb,
        "threshold_upper": t_ub,
        "thresholds_evaluated": len(frr_intervals),
        "frr_at_point_interval": [at_point.lower, at_point.upper],
        "n_star_far": far_interval.diagnostics["n_star"],
    }
    interval = IntervalResult(metric="FRR", method="roc-parametric", lower=lower, upper=upper,
                              point=at_point.point, alpha=alpha, diagnostics=diagnostics)
    return RocPointInterval(target_far=target_far, threshold_used=t0, interval=interval,
                            method="parametric_nested", alpha_far=alpha_far)


class _SortedScores:
    """Score order shared by all bootstrap replicates."""

    def __init__(self, dataset: MatchDataset):
        ia, ib = dataset.pair_identities
        genuine = dataset.genuine_mask
        scores = dataset.scores

        imp_order = np.argsort(scores[~genuine], kind="stable")
        self.imp_scores = scores[~genuine][imp_order]
        self.imp_a = ia[~genuine][imp_order]
        self.imp_b = ib[~genuine][imp_order]

        gen_order = np.argsort(scores[genuine], kind="stable")
        self.gen_scores = scores[genuine][gen_order]
        self.gen_id = ia[genuine][gen_order]
        self.m = np.asarray(dataset.instance_counts, dtype=float)
        self.n_imp = len(self.imp_scores)

    def frr_at_target(self, w: np.ndarray, scheme: str, target: float) -> float:
        if scheme == "subsets":
            pair_w = w[self.imp_a] + w[self.imp_b]
            extra = 0.0
        else:
            pair_w = w[self.imp_a] * w[self.imp_b]
            extra = float(np.dot(w * (w - 1.0), self.m ** 2)) if scheme == "vertex" else 0.0
        if extra:
            pair_w = pair_w + extra / self.n_imp
        total = pair_w.sum()
        gen_w = w[self.gen_id]
        gen_total = gen_w.sum()
        if total <= 0 or gen_total <= 0:
            return math.nan

        cumulative = np.concatenate(([0.0], np.cumsum(pair_w)))
        limit = target * total * (1.0 + ROC_CONFIG["far_tolerance"]) + ROC_CONFIG["far_tolerance"]
        k = int(np.searchsorted(cumulative, limit, side="right")) - 1
        t_star = self.imp_scores[k] if k < self.n_imp else np.inf

        start = int(np.searchsorted(self.gen_scores, t_star, side="left"))
        return float(min(max(gen_w[start:].sum() / gen_total, 0.0), 1.0))


def roc_interval_bootstrap(dataset: MatchDataset, target_far: float, alpha: Optional[float] = None,
                           scheme: Scheme = None, b: Optional[int] = None, seed: int = 0,
                           threads: Optional[int] = 1, stream_key: tuple = ()) -> RocPointInterval:
    """Vertical averaging: FRR* at each replicate's own FAR-target threshold, then percentiles."""
    alpha = INTERVAL_CONFIG["alpha"] if alpha is None else alpha
    scheme = scheme or ROC_CONFIG["default_scheme"]
    b = BOOTSTRAP_CONFIG["default_b"] if b is None else b
    if scheme not in ROC_CONFIG["bootstrap_schemes"]:
        raise InvalidInputError(f"ROC bootstrap supports {ROC_CONFIG['bootstrap_schemes']}, got '{scheme}'")
    if b < 2:
        raise InvalidInputError(f"B must be at least 2, got {b}")

    roc = empirical_roc(dataset)
    t0 = threshold_for_far(roc, target_far)
    index = int(np.searchsorted(roc.thresholds, t0, side="left"))
    point = roc.frr_at[index]

    scores = _SortedScores(dataset)
    kind = _weight_kind(scheme)
    g = dataset.g
    size = BOOTSTRAP_CONFIG["chunk_size"]
    blocks = [(k, min(size, b - k * size)) for k in range(math.ceil(b / size))]

    def run(block):
        k, n = block
        rng = stream_rng(seed, *stream_key, "roc", scheme, k)
        out = np.empty(n)
        rejected = 0
        for r in range(n):
            for _ in range(BOOTSTRAP_CONFIG["max_redraws"] + 1):
                value = scores.frr_at_target(_draw_block(kind, g, 1, rng)[0], scheme, target_far)
                if not math.isnan(value):
                    break
                rejected += 1
            else:
                raise ResamplingError(f"{scheme} ROC weights stayed degenerate after "
                                      f"{BOOTSTRAP_CONFIG['max_redraws']} redraws")
            out[r] = value
        return out, rejected

    results = ordered_map(run, blocks, threads)
    replicates = np.concatenate([values for values, _ in results])
    dist = BootstrapDistribution(replicates=replicates.tolist(), scheme=scheme, metric="FRR", b=b, seed=seed,
                                 rejected_draws=sum(r for _, r in results), point=point,
                                 setting="balanced" if dataset.is_balanced else "unbalanced")
    interval = percentile_interval(dist, alpha, method="roc-bootstrap")
    interval.diagnostics["target_far"] = target_far
    return RocPointInterval(target_far=target_far, threshold_used=t0, interval=interval,
                            method="bootstrap_vertical")
