"""Shared fixtures and small data builders."""

import itertools

import numpy as np
import pandas as pd
import pytest

from matchci.models.match_models import PairAggregates, SyntheticConfig
from matchci.simulation.synthetic import generate_synthetic


def random_aggregates(rng: np.random.Generator, g: int, m=3) -> PairAggregates:
    """Symmetric identity-level means with arbitrary values in [0, 1]."""
    y = rng.random((g, g))
    y = (y + y.T) / 2.0
    return PairAggregates.from_matrix(y, m)


def write_scores(path, rows):
    pd.DataFrame(rows, columns=["id_a", "instance_a", "id_b", "instance_b", "score"]).to_csv(path, index=False)
    return str(path)


def write_embeddings(path, identities, vectors):
    """One row per instance; instances are numbered inside their identity."""
    seen = {}
    rows = []
    for identity, vector in zip(identities, vectors):
        seen[identity] = seen.get(identity, 0) + 1
        rows.append([identity, seen[identity], *vector])
    dim = len(vectors[0])
    pd.DataFrame(rows, columns=["id", "instance", *[f"v{k}" for k in range(dim)]]).to_csv(path, index=False)
    return str(path)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_identity_scores(tmp_path):
    """Three identities with two instances each; only identities 2 and 3 are confused at t=0.5."""
    instances = [(i, k) for i in ("1", "2", "3") for k in ("1", "2")]
    rows = []
    for (ia, ka), (ib, kb) in itertools.combinations(instances, 2):
        if ia == ib:
            score = 0.1
        elif {ia, ib} == {"2", "3"}:
            score = 0.2
        else:
            score = 0.9
        rows.append([ia, ka, ib, kb, score])
    return write_scores(tmp_path / "scores.csv", rows)


@pytest.fixture
def small_config():
    return SyntheticConfig(g=12, m=3, dim=8, seed=3)


@pytest.fixture
def small_dataset(small_config):
    return generate_synthetic(small_config)


@pytest.fixture
def small_embeddings(tmp_path, small_config):
    """Embedding CSV for a small synthetic sample."""
    rng = np.random.default_rng(small_config.seed)
    beta = rng.exponential(size=(small_config.g, small_config.dim))
    x = np.repeat(beta, small_config.m, axis=0) + rng.normal(0.0, 0.5, size=(small_config.g * small_config.m, small_config.dim))
    identities = [str(i + 1) for i in range(small_config.g) for _ in range(small_config.m)]
    return write_embeddings(tmp_path / "embeddings.csv", identities, x.tolist())
