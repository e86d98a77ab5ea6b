"""
Identity-level bootstrap of FRR and FAR.

Four schemes are supported. ``subsets`` reweights identities with multinomial
weights, ``two_level`` adds a second stage that resamples comparisons inside
the chosen identities, ``vertex`` reweights identity pairs by w_i w_j and fills
repeated identities with the original FAR, and ``double_or_nothing`` uses iid
weights in {0, 2}.

Replicates are ratios of weighted cell sums. Cells are weighted by M~_i for FRR
and by M_i M_j for FAR, which reduces to the textbook balanced formulas when all
identities have the same number of instances.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from matchci.config.settings import BOOTSTRAP_CONFIG
from matchci.estimators.point_estimators import estimate, off_diagonal
from matchci.models.match_models import (
    BootstrapDistribution, IntervalResult, Metric, OutcomeStore, PairAggregates, Scheme, WeightVector,
)
from matchci.utils.errors import InvalidInputError, ResamplingError
from matchci.utils.parallel import ordered_map
from matchci.utils.rng import stream_rng

logger = logging.getLogger(__name__)

SCHEMES = tuple(BOOTSTRAP_CONFIG["schemes"])


def _weight_kind(scheme: str) -> str:
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown bootstrap scheme '{scheme}', choose from {SCHEMES}")
    return "double_or_nothing" if scheme == "double_or_nothing" else "multinomial"


def _draw_block(kind: str, g: int, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "multinomial":
        return rng.multinomial(g, np.full(g, 1.0 / g), size=n).astype(float)
    return 2.0 * rng.integers(0, 2, size=(n, g))


def draw_weights(scheme: str, g: int, rng: np.random.Generator) -> WeightVector:
    if g < 1:
        raise InvalidInputError("weights need at least one identity")
    kind = scheme if scheme in ("multinomial", "double_or_nothing") else _weight_kind(scheme)
    w = _draw_block(kind, g, 1, rng)[0].astype(np.int64)
    return WeightVector(w=w, scheme=kind)


class _Cells:
    """Per-identity quantities shared by every replicate."""

    def __init__(self, agg: PairAggregates):
        self.m = agg.instance_counts.astype(float)
        self.m_tilde = agg.m_tilde.astype(float)
        self.frr_cells = self.m_tilde * np.diag(agg.y_bar)
        self.pair_weight = off_diagonal(np.outer(self.m, self.m))
        self.pair_cells = self.pair_weight * agg.y_bar
        self.row_weight = self.pair_weight.sum(axis=1)
        self.row_cells = self.pair_cells.sum(axis=1)
        self.far_hat = estimate(agg, "FAR").value if agg.g >= 2 else math.nan

    def frr(self, W: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return W @ self.frr_cells, W @ self.m_tilde

    def far_rows(self, W: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return W @ self.row_cells, W @ self.row_weight

    def far_pairs(self, W: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        num = np.einsum("bi,ij,bj->b", W, self.pair_cells, W)
        den = np.einsum("bi,ij,bj->b", W, self.pair_weight, W)
        return num, den

    def far_vertex(self, W: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        num, den = self.far_pairs(W)
        repeat = (W * (W - 1.0)) @ (self.m ** 2)
        return num + repeat * self.far_hat, den + repeat


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    return np.clip(out, 0.0, 1.0)


def _stage_two(store: OutcomeStore, W: np.ndarray, rng: Optional[np.random.Generator]) -> Tuple[np.ndarray, np.ndarray]:
    """Resample comparisons with replacement inside every drawn identity copy.

    Summed over w_i copies, the errors among resampled comparisons of identity i
    are Binomial(w_i n_i, p_i); ``rng=None`` substitutes the expectation.
    """
    within_p = np.divide(store.within_ones, store.within_total,
                         out=np.zeros(len(store.within_total)), where=store.within_total > 0)
    cross_p = np.divide(store.cross_ones, store.cross_total,
                        out=np.zeros(len(store.cross_total)), where=store.cross_total > 0)
    within_n = W * store.within_total
    cross_n = W * store.cross_total
    if rng is None:
        within_hits = within_n * within_p
        cross_hits = cross_n * cross_p
    else:
        within_hits = rng.binomial(within_n.astype(np.int64), within_p).astype(float)
        cross_hits = rng.binomial(cross_n.astype(np.int64), cross_p).astype(float)
    frr = _ratio(within_hits.sum(axis=1), within_n.sum(axis=1))
    far = _ratio(cross_hits.sum(axis=1), cross_n.sum(axis=1))
    return frr, far


def weighted_replicates(agg: PairAggregates, scheme: Scheme, weights: np.ndarray,
                        store: Optional[OutcomeStore] = None,
                        rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(FRR*, FAR*) for each row of a B x G weight matrix; NaN marks an undefined replicate."""
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    _weight_kind(scheme)
    if scheme == "two_level":
        if store is None:
            raise InvalidInputError("two-level resampling needs the outcome store")
        return _stage_two(store, W, rng)

    cells = _Cells(agg)
    frr = _ratio(*cells.frr(W))
    if scheme == "subsets":
        far = _ratio(*cells.far_rows(W))
    elif scheme == "vertex":
        far = _ratio(*cells.far_vertex(W))
    else:
        far = _ratio(*cells.far_pairs(W))
    return frr, far


def _single(values: Tuple[np.ndarray, np.ndarray]) -> Tuple[float, float]:
    return float(values[0][0]), float(values[1][0])


def subsets_replicate(agg: PairAggregates, w) -> Tuple[float, float]:
    return _single(weighted_replicates(agg, "subsets", _as_array(w)))


def two_level_replicate(store: Optional[OutcomeStore], w, rng: Optional[np.random.Generator]) -> Tuple[float, float]:
    """Second stage uses ``rng``; ``rng=None`` is the no-op mode that keeps every comparison once."""
    if store is None:
        raise InvalidInputError("two-level resampling needs the outcome store")
    W = np.atleast_2d(np.asarray(_as_array(w), dtype=float))
    return _single(_stage_two(store, W, rng))


def vertex_replicate(agg: PairAggregates, w, far_hat: Optional[float] = None) -> float:
    if agg.g < 2:
        raise InvalidInputError("vertex resampling needs at least 2 identities")
    cells = _Cells(agg)
    if far_hat is not None:
        cells.far_hat = far_hat
    W = np.atleast_2d(np.asarray(_as_array(w), dtype=float))
    return float(_ratio(*cells.far_vertex(W))[0])


def don_replicate(agg: PairAggregates, w) -> Tuple[float, float]:
    """Double-or-nothing replicate; a metric whose weights leave nothing to average is NaN."""
    return _single(weighted_replicates(agg, "double_or_nothing", _as_array(w)))


def _as_array(w) -> np.ndarray:
    return w.w if isinstance(w, WeightVector) else np.asarray(w)


def _chunk(agg: PairAggregates, scheme: Scheme, metric: Metric, size: int, seed: int, key: tuple,
           store: Optional[OutcomeStore]) -> Tuple[np.ndarray, int]:
    rng = stream_rng(seed, *key)
    kind = _weight_kind(scheme)
    column = 0 if metric == "FRR" else 1
    values = weighted_replicates(agg, scheme, _draw_block(kind, agg.g, size, rng), store, rng)[column]
    rejected = 0
    for attempt in range(BOOTSTRAP_CONFIG["max_redraws"] + 1):
        bad = np.isnan(values)
        if not bad.any():
            return values, rejected
        if attempt == BOOTSTRAP_CONFIG["max_redraws"]:
            break
        rejected += int(bad.sum())
        redrawn = _draw_block(kind, agg.g, int(bad.sum()), rng)
        values[bad] = weighted_replicates(agg, scheme, redrawn, store, rng)[column]
    raise ResamplingError(f"{scheme} weights stayed degenerate for {metric} after "
                          f"{BOOTSTRAP_CONFIG['max_redraws']} redraws")


def bootstrap_distribution(agg: PairAggregates, scheme: Scheme, metric: Metric, b: int, seed: int,
                           store: Optional[OutcomeStore] = None, threads: Optional[int] = 1,
                           stream_key: tuple = ()) -> BootstrapDistribution:
    """B replicates of ``metric``; replicate blocks come from streams (seed, *stream_key, scheme, block)."""
    if b < 1:
        raise InvalidInputError(f"B must be positive, got {b}")
    if scheme == "two_level" and store is None:
        raise InvalidInputError("two-level resampling needs the outcome store")
    point = estimate(agg, metric).value

    size = BOOTSTRAP_CONFIG["chunk_size"]
    blocks = [(k, min(size, b - k * size)) for k in range(math.ceil(b / size))]

    def run(block):
        k, n = block
        return _chunk(agg, scheme, metric, n, seed, (*stream_key, scheme, k), store)

    results = ordered_map(run, blocks, threads)
    replicates = np.concatenate([values for values, _ in results])
    rejected = sum(r for _, r in results)
    if rejected:
        logger.debug(f"{scheme}/{metric}: {rejected} degenerate weight draws replaced")
    return BootstrapDistribution(replicates=[float(x) for x in replicates], scheme=scheme, metric=metric,
                                 b=b, seed=seed, rejected_draws=rejected, point=point, setting=agg.setting)


def percentile_indices(b: int, alpha: float) -> Tuple[int, int, bool]:
    """1-based order-statistic indices of the percentile interval and whether a clamp was needed."""
    tol = BOOTSTRAP_CONFIG["index_tolerance"]
    low = math.floor(b * alpha / 2.0 + tol)
    high = math.ceil(b * (1.0 - alpha / 2.0) - tol)
    clamped = low < 1 or high > b
    return max(low, 1), min(high, b), clamped


def percentile_interval(dist: BootstrapDistribution, alpha: float, method: Optional[str] = None) -> IntervalResult:
    if dist.b < 2:
        raise InvalidInputError(f"percentile interval needs B >= 2, got {dist.b}")
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    low, high, clamped = percentile_indices(dist.b, alpha)
    if clamped:
        logger.warning(f"Percentile index clamped for B={dist.b}, alpha={alpha}")
    ordered = dist.sorted_replicates
    lower, upper = ordered[low - 1], ordered[high - 1]
    point = dist.point if dist.point is not None else float(np.median(ordered))
    diagnostics = {
        "b": dist.b,
        "seed": dist.seed,
        "scheme": dist.scheme,
        "rejected_draws": dist.rejected_draws,
        "lower_index": low,
        "upper_index": high,
        "index_clamped": clamped,
        "setting": dist.setting,
    }
    return IntervalResult(metric=dist.metric, method=method or dist.scheme, lower=lower, upper=upper,
                          point=point, alpha=alpha, diagnostics=diagnostics)


def bootstrap_variance(dist: BootstrapDistribution, g: int) -> float:
    """Bootstrap variance of sqrt(G) times the replicate statistic."""
    values = np.asarray(dist.replicates)
    return float(g * values.var(ddof=1)) if len(values) > 1 else 0.0


def exact_don_replicates(agg: PairAggregates) -> List[Tuple[float, float]]:
    """All 2^G double-or-nothing replicates, for small G."""
    g = agg.g
    if g > 16:
        raise InvalidInputError("exhaustive enumeration is limited to G <= 16")
    grid = 2.0 * ((np.arange(2 ** g)[:, None] >> np.arange(g)) & 1)
    frr, far = weighted_replicates(agg, "double_or_nothing", grid)
    return list(zip(frr.tolist(), far.tolist()))
