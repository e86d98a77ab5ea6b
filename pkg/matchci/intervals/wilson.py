"""
Wilson score intervals for FRR and FAR.

The naive variant treats every comparison as an independent Bernoulli trial.
The adjusted variant replaces the trial count by the effective sample size
N* = p(1 - p) / Var(p_hat) implied by a dependence-aware variance estimate.
"""

import logging
import math
from typing import Literal, Optional, Tuple

from scipy.stats import norm

from matchci.config.settings import INTERVAL_CONFIG
from matchci.estimators.point_estimators import estimate, naive_pair_count
from matchci.estimators.variance import FrrMode, variance_for
from matchci.models.match_models import (
    EffectiveSampleSize, ErrorEstimate, IntervalResult, Metric, PairAggregates, VarianceEstimate,
)
from matchci.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)


def z_quantile(alpha: float) -> float:
    """Two-sided standard normal critical value z_{1 - alpha/2}."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return float(norm.ppf(1.0 - alpha / 2.0))


def wilson_core(p_hat: float, n_star: float, alpha: float) -> Tuple[float, float]:
    if n_star <= 0:
        raise InvalidInputError(f"effective sample size must be positive, got {n_star}")
    if not 0.0 <= p_hat <= 1.0:
        raise InvalidInputError(f"proportion must lie in [0, 1], got {p_hat}")
    z = z_quantile(alpha)
    z2 = z * z
    center = (p_hat * n_star + z2 / 2.0) / (n_star + z2)
    half = z * math.sqrt(n_star) / (n_star + z2) * math.sqrt(p_hat * (1.0 - p_hat) + z2 / (4.0 * n_star))
    lower = 0.0 if p_hat == 0.0 else min(max(center - half, 0.0), 1.0)
    upper = 1.0 if p_hat == 1.0 else min(max(center + half, 0.0), 1.0)
    return lower, upper


def wald_half_width(p_hat: float, n_star: float, alpha: float) -> float:
    return z_quantile(alpha) * math.sqrt(p_hat * (1.0 - p_hat) / n_star)


def wald_interval(p_hat: float, scaled_variance: float, g: int, alpha: float) -> Tuple[float, float]:
    """Dependence-adjusted Wald interval; kept for comparisons, not offered as a method."""
    half = z_quantile(alpha) * math.sqrt(max(scaled_variance, 0.0) / g)
    return max(p_hat - half, 0.0), min(p_hat + half, 1.0)


def _effective_n(point: ErrorEstimate, variance: VarianceEstimate, g: int, naive_pairs: float,
                 floor: float) -> EffectiveSampleSize:
    if naive_pairs <= 0:
        raise InvalidInputError(f"no {point.metric} comparisons available")
    p = point.value
    var_hat = variance.scaled_variance / g
    cap = naive_pairs if INTERVAL_CONFIG["cap_at_naive"] else math.inf

    if var_hat == 0.0 and 0.0 < p < 1.0:
        logger.warning(f"{point.metric} variance is 0 with p_hat={p:.4g}; N* capped at naive count {naive_pairs}")
        return EffectiveSampleSize(value=naive_pairs, kind="adjusted", cap_applied=True)

    ratio = p * (1.0 - p) / var_hat if var_hat > 0.0 else 0.0
    value = max(ratio, floor)
    floor_applied = ratio < floor
    cap_applied = value > cap
    if cap_applied:
        logger.warning(f"{point.metric} N* {value:.4g} exceeds naive count {naive_pairs}; capped")
        value = cap
    return EffectiveSampleSize(value=value, kind="adjusted", floor_applied=floor_applied,
                               cap_applied=cap_applied, ratio=ratio)


def effective_n_far(far: ErrorEstimate, var_far: VarianceEstimate, g: int, naive_pairs: float) -> EffectiveSampleSize:
    if g < 2:
        raise InvalidInputError(f"FAR effective size needs G >= 2, got {g}")
    return _effective_n(far, var_far, g, naive_pairs, floor=g // 2)


def effective_n_frr(frr: ErrorEstimate, var_frr: VarianceEstimate, g: int, naive_pairs: float) -> EffectiveSampleSize:
    if g < 1:
        raise InvalidInputError("FRR effective size needs at least one identity")
    return _effective_n(frr, var_frr, g, naive_pairs, floor=g)


def wilson_interval(metric: Metric, agg: PairAggregates, mode: Literal["naive", "adjusted"] = "adjusted",
                    alpha: Optional[float] = None, frr_mode: Optional[FrrMode] = None) -> IntervalResult:
    alpha = INTERVAL_CONFIG["alpha"] if alpha is None else alpha
    point = estimate(agg, metric)
    naive_pairs = naive_pair_count(agg, metric)
    diagnostics = {
        "setting": point.setting,
        "g": agg.g,
        "naive_pairs": naive_pairs,
        "z": z_quantile(alpha),
        "threshold": agg.threshold,
    }

    if mode == "naive":
        if naive_pairs <= 0:
            raise InvalidInputError(f"no {metric} comparisons available")
        n_star = EffectiveSampleSize(value=naive_pairs, kind="naive")
        method = "naive-wilson"
    elif mode == "adjusted":
        variance = variance_for(agg, point, frr_mode)
        if metric == "FAR":
            n_star = effective_n_far(point, variance, agg.g, naive_pairs)
        else:
            n_star = effective_n_frr(point, variance, agg.g, naive_pairs)
        diagnostics.update({
            "variance_scaled": variance.scaled_variance,
            "variance_raw": variance.raw_variance,
            "variance_clamped": variance.clamped,
            "variance_estimator": variance.estimator,
        })
        if variance.mode:
            diagnostics["variance_mode"] = variance.mode
        method = "wilson"
    else:
        raise InvalidInputError(f"unknown Wilson mode '{mode}'")

    lower, upper = wilson_core(point.value, n_star.value, alpha)
    diagnostics.update({
        "n_star": n_star.value,
        "n_star_kind": n_star.kind,
        "floor_applied": n_star.floor_applied,
        "cap_applied": n_star.cap_applied,
    })
    return IntervalResult(metric=metric, method=method, lower=lower, upper=upper, point=point.value,
                          alpha=alpha, diagnostics=diagnostics)
