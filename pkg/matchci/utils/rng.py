"""Seeded random streams.

Every consumer asks for a stream by key, e.g. (seed, "replication", r) or
(seed, "vertex", chunk). Streams are counter-based Philox generators seeded
from a SeedSequence whose spawn key is the stream key, so two different keys
never share state and a key always replays the same numbers.
"""

import os
import logging
from typing import Optional, Union

import numpy as np

from matchci.config.settings import SYSTEM_CONFIG
from matchci.utils.errors import InvalidInputError

logger = logging.getLogger(__name__)

# Stable integer codes for the named parts of a stream key
STREAM_KEYS = {
    "synthetic": 1,
    "calibration": 2,
    "replication": 3,
    "subsets": 11,
    "two_level": 12,
    "vertex": 13,
    "double_or_nothing": 14,
    "roc": 20,
}

KeyPart = Union[int, str]


def _key_code(part: KeyPart) -> int:
    if isinstance(part, str):
        if part not in STREAM_KEYS:
            raise InvalidInputError(f"Unknown random stream name '{part}'")
        return STREAM_KEYS[part]
    value = int(part)
    if value < 0:
        raise InvalidInputError(f"Stream key parts must be non-negative, got {value}")
    return value


def stream_rng(seed: int, *key: KeyPart) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``seed``."""
    if seed < 0:
        raise InvalidInputError(f"Seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_code(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def resolve_seed(seed: Optional[int]) -> int:
    """CLI seed, then the MATCHCI_SEED environment variable, then the configured default."""
    if seed is not None:
        return int(seed)

    env_name = SYSTEM_CONFIG["seed_env_var"]
    raw = os.environ.get(env_name)
    if raw is not None and raw.strip():
        try:
            return int(raw)
        except ValueError:
            raise InvalidInputError(f"{env_name} must be an integer, got '{raw}'")

    return int(SYSTEM_CONFIG["default_seed"])
