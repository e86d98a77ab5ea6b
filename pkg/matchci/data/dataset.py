"""
Datasets, thresholded comparison outcomes and their identity-level aggregation.

Scores are dissimilarities: a genuine comparison errs when s >= t, an impostor
comparison errs when s < t.
"""

import logging
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from matchci.models.match_models import ComparisonOutcome, MatchDataset, OutcomeStore, PairAggregates
from matchci.utils.errors import DataError, InvalidInputError

logger = logging.getLogger(__name__)

DISSIMILARITIES = ("euclidean", "cosine")


def build_dataset(instance_identities: Sequence[str], instance_labels: Optional[Sequence[str]] = None, *,
                  scores: Optional[np.ndarray] = None, embeddings: Optional[np.ndarray] = None,
                  dissimilarity: str = "euclidean") -> MatchDataset:
    """Group instances by identity (order of first appearance) and attach scores.

    ``scores`` is a condensed vector over the instances in the order given;
    ``embeddings`` has one row per instance and is turned into scores with
    ``dissimilarity``. Exactly one of the two must be supplied.
    """
    instance_identities = [str(i) for i in instance_identities]
    n = len(instance_identities)
    if n == 0:
        raise InvalidInputError("dataset has no instances")
    if (scores is None) == (embeddings is None):
        raise InvalidInputError("provide either pairwise scores or embeddings")

    identities = list(dict.fromkeys(instance_identities))
    position = {label: i for i, label in enumerate(identities)}
    codes = np.array([position[label] for label in instance_identities])
    order = np.argsort(codes, kind="stable")
    counts = np.bincount(codes, minlength=len(identities)).astype(np.int64)

    if instance_labels is None:
        within = np.empty(n, dtype=np.int64)
        within[order] = np.arange(n) - np.repeat(np.concatenate(([0], np.cumsum(counts)[:-1])), counts) + 1
        instance_labels = [str(k) for k in within]
    instance_labels = [str(instance_labels[k]) for k in order]

    if embeddings is not None:
        embeddings = np.asarray(embeddings, dtype=float)[order]
        if dissimilarity not in DISSIMILARITIES:
            raise InvalidInputError(f"unknown dissimilarity '{dissimilarity}', choose from {DISSIMILARITIES}")
        condensed = pdist(embeddings, metric=dissimilarity) if n > 1 else np.empty(0)
    else:
        condensed = np.asarray(scores, dtype=float)
        if len(condensed) != n * (n - 1) // 2:
            raise InvalidInputError(f"expected {n * (n - 1) // 2} pair scores for {n} instances")
        if not np.array_equal(order, np.arange(n)):
            square = squareform(condensed, checks=False)[np.ix_(order, order)]
            condensed = squareform(square, checks=False)
        dissimilarity = None

    dataset = MatchDataset(identities=tuple(identities), instance_counts=counts,
                           instance_labels=tuple(instance_labels), scores=condensed,
                           embeddings=embeddings, dissimilarity=dissimilarity)
    logger.debug(f"Built dataset: G={dataset.g}, instances={n}, balanced={dataset.is_balanced}")
    return dataset


def _missing_pair_error(dataset: MatchDataset, position: int) -> DataError:
    a, b = dataset.pair_instances
    pair = (dataset.instance_key(int(a[position])), dataset.instance_key(int(b[position])))
    return DataError(f"missing score for pair {pair[0]} - {pair[1]}", pair=pair)


def check_complete(dataset: MatchDataset) -> None:
    """Raise a data error naming the first pair without a score."""
    missing = np.flatnonzero(np.isnan(dataset.scores))
    if len(missing):
        raise _missing_pair_error(dataset, int(missing[0]))


def outcome_values(dataset: MatchDataset, t: float) -> np.ndarray:
    """Error indicators for every unordered pair, condensed order."""
    check_complete(dataset)
    scores = dataset.scores
    return np.where(dataset.genuine_mask, scores >= t, scores < t).astype(np.int8)


def threshold_outcomes(dataset: MatchDataset, t: float) -> Iterator[ComparisonOutcome]:
    """Stream the outcome of every unordered instance pair at threshold ``t``.

    Self-pairs are never produced. A pair with no score raises a data error when
    it is reached.
    """
    a, b = dataset.pair_instances
    identity = dataset.instance_identity
    index = dataset.instance_index
    for position, s in enumerate(dataset.scores):
        if np.isnan(s):
            raise _missing_pair_error(dataset, position)
        ia, ib = int(identity[a[position]]), int(identity[b[position]])
        value = int(s >= t) if ia == ib else int(s < t)
        yield ComparisonOutcome(identity_a=ia, instance_a=int(index[a[position]]),
                                identity_b=ib, instance_b=int(index[b[position]]), value=value)


def _finish_aggregates(sums: np.ndarray, counts_per_identity: np.ndarray, t: Optional[float]) -> PairAggregates:
    m = counts_per_identity.astype(np.int64)
    counts = np.outer(m, m)
    np.fill_diagonal(counts, m * (m - 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        y_bar = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    y_bar = np.clip(y_bar, 0.0, 1.0)
    return PairAggregates(g=len(m), y_bar=y_bar, counts=counts, m_tilde=m * (m - 1),
                          instance_counts=m, threshold=t)


def aggregate_pairs(outcomes: Iterable[ComparisonOutcome], dataset: MatchDataset,
                    threshold: Optional[float] = None) -> PairAggregates:
    """Identity-level means from a stream of unordered comparison outcomes.

    Each unordered pair is added once and mirrored, so the within-identity
    ordered-pair mean equals twice the unordered sum over M_i(M_i - 1).
    """
    g = dataset.g
    m = np.asarray(dataset.instance_counts)
    sums = np.zeros((g, g))
    for outcome in outcomes:
        i, j = outcome.identity_a, outcome.identity_b
        if i >= g or j >= g:
            raise DataError(f"outcome refers to identity {max(i, j)} outside a dataset of {g}", pair=outcome.pair)
        if i == j and m[i] < 2:
            raise InvalidInputError(f"identity {dataset.identities[i]} has {m[i]} instance and cannot contribute genuine comparisons")
        sums[i, j] += outcome.value
        if i != j:
            sums[j, i] += outcome.value
    np.fill_diagonal(sums, 2.0 * np.diag(sums))
    return _finish_aggregates(sums, m, threshold)


def aggregate_at_threshold(dataset: MatchDataset, t: float, values: Optional[np.ndarray] = None) -> PairAggregates:
    """Vectorized aggregation of all comparisons at threshold ``t``."""
    if values is None:
        values = outcome_values(dataset, t)
    g = dataset.g
    ia, ib = dataset.pair_identities
    # instances are grouped, so ia <= ib and every cell lands on or above the diagonal
    sums = np.bincount(ia * g + ib, weights=values, minlength=g * g).reshape(g, g)
    sums = sums + sums.T
    return _finish_aggregates(sums, np.asarray(dataset.instance_counts), t)


def build_outcome_store(agg: PairAggregates) -> OutcomeStore:
    """Tally per identity the errors among its unordered genuine and its impostor comparisons."""
    m = agg.instance_counts.astype(np.int64)
    within_total = m * (m - 1) // 2
    within_ones = np.rint(np.diag(agg.y_bar) * within_total).astype(np.int64)
    off = agg.y_bar * agg.counts
    np.fill_diagonal(off, 0.0)
    cross_ones = np.rint(off.sum(axis=1)).astype(np.int64)
    cross_total = m * (m.sum() - m)
    return OutcomeStore(within_ones=within_ones, within_total=within_total,
                        cross_ones=cross_ones, cross_total=cross_total, threshold=agg.threshold)


def genuine_scores(dataset: MatchDataset) -> np.ndarray:
    check_complete(dataset)
    return dataset.scores[dataset.genuine_mask]


def impostor_scores(dataset: MatchDataset) -> np.ndarray:
    check_complete(dataset)
    return dataset.scores[~dataset.genuine_mask]
