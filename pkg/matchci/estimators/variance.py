"""
Variance estimators for sqrt(G) * FRR and sqrt(G) * FAR.

All sums over distinct identity triples are evaluated through row sums, which
keeps every estimator O(G^2).
"""

import logging
from typing import Literal, Optional

import numpy as np

from matchci.config.settings import INTERVAL_CONFIG
from matchci.estimators.point_estimators import off_diagonal
from matchci.models.match_models import ErrorEstimate, PairAggregates, VarianceEstimate
from matchci.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)

FrrMode = Literal["delta_full", "delta_independent"]


def _require_g(agg: PairAggregates, minimum: int, what: str) -> int:
    if agg.g < minimum:
        raise InvalidInputError(f"{what} needs at least {minimum} identities, got {agg.g}")
    return agg.g


def _clamped(target, raw: float, estimator: str, components=None, mode=None) -> VarianceEstimate:
    clamped = raw < 0.0
    if clamped:
        logger.warning(f"{target} variance estimate {raw:.3e} is negative; clamped to 0")
    return VarianceEstimate(target=target, scaled_variance=max(raw, 0.0), raw_variance=raw,
                            clamped=clamped, components=components, estimator=estimator, mode=mode)


def _deviations(agg: PairAggregates, far: ErrorEstimate) -> np.ndarray:
    return off_diagonal(agg.y_bar - far.value)


def var_frr_plugin(agg: PairAggregates, frr: ErrorEstimate) -> VarianceEstimate:
    _require_g(agg, 2, "FRR variance")
    if not agg.is_balanced:
        raise InvalidInputError("plug-in FRR variance assumes equal instance counts")
    diag = np.diag(agg.y_bar)
    raw = float(np.mean((diag - frr.value) ** 2))
    return _clamped("FRR", raw, "plugin")


def var_y12_plugin(agg: PairAggregates, far: ErrorEstimate) -> float:
    g = _require_g(agg, 2, "Var(Y12)")
    d = _deviations(agg, far)
    return float((d ** 2).sum() / (g * (g - 1)))


def cov_y12_y13_plugin(agg: PairAggregates, far: ErrorEstimate) -> float:
    """Mean of (Y_ij - FAR)(Y_ik - FAR) over ordered triples of distinct identities."""
    g = _require_g(agg, 3, "Cov(Y12, Y13)")
    d = _deviations(agg, far)
    rows = d.sum(axis=1)
    total = (rows ** 2).sum() - (d ** 2).sum()
    return float(total / (g * (g - 1) * (g - 2)))


def var_far_plugin(agg: PairAggregates, far: ErrorEstimate) -> VarianceEstimate:
    g = _require_g(agg, 3, "plug-in FAR variance")
    v = var_y12_plugin(agg, far)
    c = cov_y12_y13_plugin(agg, far)
    raw = 2.0 / (g - 1) * v + 4.0 * (g - 2) / (g - 1) * c
    return _clamped("FAR", raw, "plugin", components={"var_y12": v, "cov_y12_y13": c})


def leave_one_out_far(agg: PairAggregates) -> np.ndarray:
    """FAR recomputed with each identity removed."""
    g = _require_g(agg, 3, "leave-one-out FAR")
    y = off_diagonal(agg.y_bar)
    total = y.sum()
    return (total - y.sum(axis=1) - y.sum(axis=0)) / ((g - 1) * (g - 2))


def var_far_jackknife(agg: PairAggregates, far: ErrorEstimate) -> VarianceEstimate:
    g = _require_g(agg, 3, "jackknife FAR variance")
    v = var_y12_plugin(agg, far)
    loo = leave_one_out_far(agg)
    raw = (g - 2) ** 2 / g * float(((loo - far.value) ** 2).sum()) - 2.0 * v / (g - 1)
    return _clamped("FAR", raw, "jackknife", components={"var_y12": v})


def var_frr_unbalanced(agg: PairAggregates, frr: ErrorEstimate, mode: Optional[FrrMode] = None) -> VarianceEstimate:
    """Delta-method variance of the M~-weighted FRR, moments averaged over identities.

    ``delta_full`` linearizes the ratio of means of u_i = M~_i Y_ii and M~_i;
    ``delta_independent`` treats M~ and Y as independent and centres at FRR.
    """
    _require_g(agg, 2, "unbalanced FRR variance")
    mode = mode or INTERVAL_CONFIG["frr_unbalanced_mode"]
    m = agg.m_tilde.astype(float)
    mean_m = m.mean()
    if mean_m <= 0:
        raise InvalidInputError("no identity has 2 or more instances; FRR variance is undefined")
    y = np.diag(agg.y_bar)

    if mode == "delta_independent":
        raw = float(np.mean(m ** 2 * (y - frr.value) ** 2) / mean_m ** 2)
    elif mode == "delta_full":
        u = m * y
        mean_u = u.mean()
        var_u = np.mean((u - mean_u) ** 2)
        var_m = np.mean((m - mean_m) ** 2)
        cov_um = np.mean((u - mean_u) * (m - mean_m))
        raw = float(var_u / mean_m ** 2 - 2.0 * mean_u * cov_um / mean_m ** 3
                    + mean_u ** 2 * var_m / mean_m ** 4)
    else:
        raise InvalidInputError(f"unknown FRR variance mode '{mode}'")
    return _clamped("FRR", raw, "unbalanced_delta", mode=mode)


def var_far_unbalanced(agg: PairAggregates, far: ErrorEstimate) -> VarianceEstimate:
    """Delta-method FAR variance with M_i^2 M_j^2 and M_i^2 M_j M_k weighted moments."""
    g = _require_g(agg, 3, "unbalanced FAR variance")
    m = agg.instance_counts.astype(float)
    e = _deviations(agg, far)
    mean_m4 = m.mean() ** 4

    weighted = (m[:, None] * m[None, :]) ** 2 * e ** 2
    term_var = weighted.sum() / (g * (g - 1))

    a = e * m[None, :]
    rows = a.sum(axis=1)
    term_cov = float(np.dot(m ** 2, rows ** 2 - (a ** 2).sum(axis=1))) / (g * (g - 1) * (g - 2))

    v = float(term_var / mean_m4)
    c = float(term_cov / mean_m4)
    raw = 2.0 / (g - 1) * v + 4.0 * (g - 2) / (g - 1) * c
    return _clamped("FAR", raw, "unbalanced_delta", components={"var_y12": v, "cov_y12_y13": c})


def variance_for(agg: PairAggregates, estimate: ErrorEstimate, frr_mode: Optional[FrrMode] = None) -> VarianceEstimate:
    """Pick the plug-in estimator for balanced data and the delta-method one otherwise."""
    if estimate.metric == "FRR":
        if estimate.setting == "balanced":
            return var_frr_plugin(agg, estimate)
        return var_frr_unbalanced(agg, estimate, frr_mode)
    if estimate.setting == "balanced":
        return var_far_plugin(agg, estimate)
    return var_far_unbalanced(agg, estimate)
