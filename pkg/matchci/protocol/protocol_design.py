"""
Budget-constrained choice of which comparisons to run.

The variance of an estimate built from selected pairs grows with the number of
ordered triples (i, j, k) in which the pairs (i, j) and (i, k) share a unit.
Pairs are picked in the order of the least-visited-first greedy rule (fewest
visits, then more instances, then input order). A bounded depth-first repair
keeps each prefix's visit counts within one of each other. That is exactly the
minimum of the sharing objective for that many pairs.
"""

import heapq
import logging
from collections import Counter
from itertools import combinations
from typing import Dict, Hashable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from pydantic import ValidationError

from matchci.config.settings import PROTOCOL_CONFIG
from matchci.models.match_models import Budget, ProtocolPlan, ProtocolSelection
from matchci.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


def sharing_objective(selections: Iterable[Tuple[Hashable, Hashable]]) -> int:
    """Sum over ordered triples (i, j, k), j != k, of b_ij * b_ik; repeated pairs count with multiplicity."""
    multiplicity = Counter()
    for a, b in selections:
        if a == b:
            raise InvalidInputError(f"pair ({a}, {b}) joins a unit with itself")
        multiplicity[frozenset((a, b))] += 1

    degree: Dict[Hashable, int] = Counter()
    squares: Dict[Hashable, int] = Counter()
    for pair, count in multiplicity.items():
        for unit in pair:
            degree[unit] += count
            squares[unit] += count * count
    return sum(degree[u] * degree[u] - squares[u] for u in degree)


def minimum_sharing(n_units: int, n_pairs: int) -> int:
    """Objective of a simple graph whose degrees differ by at most one."""
    q, r = divmod(2 * n_pairs, n_units)
    return r * (q + 1) * q + (n_units - r) * q * (q - 1)


def _ordered_units(visits: List[int], weights: Sequence[int]) -> List[int]:
    heap = [(visits[u], -weights[u], u) for u in range(len(visits))]
    heapq.heapify(heap)
    return [heapq.heappop(heap)[2] for _ in range(len(heap))]


def _greedy_candidates(visits: List[int], weights: Sequence[int], used: set) -> Iterator[Pair]:
    """First unused pair in least-visited order; falls through to the next visit tier by itself."""
    return _pairs_in_order(_ordered_units(visits, weights), used)


def _balanced_candidates(visits: List[int], weights: Sequence[int], used: set) -> Iterator[Pair]:
    """Unused pairs whose selection keeps max(visits) - min(visits) <= 1."""
    order = _ordered_units(visits, weights)
    low = visits[order[0]]
    lows = [u for u in order if visits[u] == low]
    if len(lows) == len(order):
        yield from _pairs_in_order(order, used)
    elif len(lows) >= 2:
        yield from _pairs_in_order(lows, used)
    else:
        lonely = lows[0]
        for other in order[1:]:
            pair = (min(lonely, other), max(lonely, other))
            if pair not in used:
                yield pair


def _pairs_in_order(order: List[int], used: set) -> Iterator[Pair]:
    for position, a in enumerate(order):
        for b in order[position + 1:]:
            pair = (min(a, b), max(a, b))
            if pair not in used:
                yield pair


def _greedy_sequence(n_units: int, weights: Sequence[int], n_steps: int) -> List[Pair]:
    visits = [0] * n_units
    used: set = set()
    sequence = []
    for _ in range(n_steps):
        pair = next(_greedy_candidates(visits, weights, used), None)
        if pair is None:
            break
        used.add(pair)
        visits[pair[0]] += 1
        visits[pair[1]] += 1
        sequence.append(pair)
    return sequence


def balanced_pair_sequence(n_units: int, weights: Sequence[int], n_steps: int,
                           max_nodes: Optional[int] = None) -> Tuple[List[Pair], bool]:
    """Distinct unit pairs whose every prefix has near-equal visit counts.

    Returns the sequence and whether the balanced search succeeded; on failure the
    plain greedy order is returned instead.
    """
    n_steps = min(n_steps, n_units * (n_units - 1) // 2)
    if n_steps <= 0:
        return [], True
    max_nodes = PROTOCOL_CONFIG["max_search_nodes"] if max_nodes is None else max_nodes

    visits = [0] * n_units
    used: set = set()
    sequence: List[Pair] = []
    stack = [_balanced_candidates(visits, weights, used)]
    nodes = 0
    while stack and len(sequence) < n_steps:
        pair = next(stack[-1], None)
        if pair is None:
            stack.pop()
            if sequence:
                a, b = sequence.pop()
                used.discard((a, b))
                visits[a] -= 1
                visits[b] -= 1
            continue
        nodes += 1
        if nodes > max_nodes:
            break
        used.add(pair)
        visits[pair[0]] += 1
        visits[pair[1]] += 1
        sequence.append(pair)
        stack.append(_balanced_candidates(visits, weights, used))

    if len(sequence) == n_steps:
        return sequence, True
    logger.warning(f"Balanced pair search stopped after {nodes} nodes; using plain greedy order")
    return _greedy_sequence(n_units, weights, n_steps), False


def _validated_budget(budget: int) -> int:
    try:
        return Budget(b=budget).b
    except ValidationError:
        raise InvalidInputError(f"budget must be a positive integer, got {budget}")


def _counts(instance_counts: Mapping[str, int]) -> Tuple[List[str], List[int]]:
    labels = [str(k) for k in instance_counts]
    counts = [int(v) for v in instance_counts.values()]
    if any(c < 1 for c in counts):
        raise InvalidInputError("every identity needs at least one instance")
    return labels, counts


def plan_far_protocol(instance_counts: Mapping[str, int], budget: int) -> ProtocolPlan:
    """Impostor comparisons to run under ``budget``.

    Identity pairs follow the balanced order; once every identity pair has been
    used, the order is cycled again and each repeat picks an unused instance pair
    with the fewest instance visits.
    """
    budget = _validated_budget(budget)
    labels, counts = _counts(instance_counts)
    g = len(labels)
    if g < 2:
        raise InvalidInputError(f"FAR protocol needs at least 2 identities, got {g}")

    n_identity_pairs = g * (g - 1) // 2
    available = sum(counts[i] * counts[j] for i, j in combinations(range(g), 2))
    target = min(budget, available)
    truncated = budget > available
    if truncated:
        logger.warning(f"Budget {budget} exceeds the {available} distinct impostor comparisons; plan truncated")

    # rounds after the first cycle through the same identity order
    sequence, balanced = balanced_pair_sequence(g, counts, min(target, n_identity_pairs))

    instance_visits = [[0] * c for c in counts]
    used_instances: set = set()
    identity_pairs: List[Pair] = []
    selections: List[ProtocolSelection] = []
    while len(selections) < target:
        progressed = False
        for i, j in sequence:
            if len(selections) >= target:
                break
            choice = _least_visited_instances(i, j, counts, instance_visits, used_instances)
            if choice is None:
                continue
            k, l = choice
            used_instances.add((i, k, j, l))
            instance_visits[i][k] += 1
            instance_visits[j][l] += 1
            identity_pairs.append((i, j))
            selections.append(ProtocolSelection(iteration=len(selections) + 1, id_a=labels[i], instance_a=k + 1,
                                                id_b=labels[j], instance_b=l + 1))
            progressed = True
        if not progressed:
            break

    return ProtocolPlan(metric="FAR", budget=budget, selections=selections,
                        objective_value=sharing_objective(identity_pairs), truncated=truncated,
                        search="balanced" if balanced else "greedy")


def _least_visited_instances(i: int, j: int, counts: List[int], visits: List[List[int]],
                             used: set) -> Optional[Tuple[int, int]]:
    best = None
    for k in range(counts[i]):
        for l in range(counts[j]):
            if (i, k, j, l) in used:
                continue
            key = (visits[i][k] + visits[j][l], k, l)
            if best is None or key < best:
                best = key
    return None if best is None else (best[1], best[2])


def plan_frr_protocol(instance_counts: Mapping[str, int], budget: int) -> ProtocolPlan:
    """Genuine comparisons to run under ``budget``.

    Identities with two or more instances are visited round-robin, largest
    M_i(M_i - 1) first; inside an identity, instance pairs follow the balanced order.
    """
    budget = _validated_budget(budget)
    labels, counts = _counts(instance_counts)
    eligible = [i for i in range(len(labels)) if counts[i] >= 2]
    if not eligible:
        raise InvalidInputError("FRR protocol needs an identity with at least 2 instances")
    eligible.sort(key=lambda i: (-counts[i] * (counts[i] - 1), i))

    available = sum(counts[i] * (counts[i] - 1) // 2 for i in eligible)
    target = min(budget, available)
    truncated = budget > available
    if truncated:
        logger.warning(f"Budget {budget} exceeds the {available} distinct genuine comparisons; plan truncated")

    queues: Dict[int, List[Pair]] = {}
    balanced = True
    for i in eligible:
        pairs, ok = balanced_pair_sequence(counts[i], [1] * counts[i], counts[i] * (counts[i] - 1) // 2)
        queues[i] = pairs
        balanced = balanced and ok

    selections: List[ProtocolSelection] = []
    instance_pairs = []
    cursor = {i: 0 for i in eligible}
    while len(selections) < target:
        for i in eligible:
            if len(selections) >= target or cursor[i] >= len(queues[i]):
                continue
            k, l = queues[i][cursor[i]]
            cursor[i] += 1
            instance_pairs.append(((i, k), (i, l)))
            selections.append(ProtocolSelection(iteration=len(selections) + 1, id_a=labels[i], instance_a=k + 1,
                                                id_b=labels[i], instance_b=l + 1))

    return ProtocolPlan(metric="FRR", budget=budget, selections=selections,
                        objective_value=sharing_objective(instance_pairs), truncated=truncated,
                        search="balanced" if balanced else "greedy")
