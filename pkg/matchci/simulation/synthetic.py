"""
Synthetic matching data and threshold calibration.

Each identity i draws an effect beta_i with iid Exponential components; instance
k of identity i is X_ik = beta_i + eps_ik with iid Normal noise. Embeddings are
scaled to unit Euclidean norm and compared by Euclidean distance.
"""

import logging
from typing import Optional

import numpy as np

from matchci.config.settings import CALIBRATION_CONFIG, SYNTHETIC_CONFIG
from matchci.data.dataset import build_dataset, genuine_scores, impostor_scores
from matchci.models.match_models import MatchDataset, Metric, SyntheticConfig, ThresholdCalibration
from matchci.utils.errors import InvalidInputError
from matchci.utils.rng import stream_rng

logger = logging.getLogger(__name__)


def _instance_counts(config: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    if config.balanced:
        return np.full(config.g, config.m, dtype=np.int64)
    return rng.integers(config.m_min, config.m_max + 1, size=config.g)


def generate_synthetic(config: SyntheticConfig, rng: Optional[np.random.Generator] = None) -> MatchDataset:
    rng = stream_rng(config.seed, "synthetic") if rng is None else rng
    counts = _instance_counts(config, rng)

    beta = rng.exponential(scale=1.0 / config.beta_scale, size=(config.g, config.dim))
    x = np.repeat(beta, counts, axis=0)
    if config.noise_sd > 0:
        x = x + rng.normal(0.0, config.noise_sd, size=x.shape)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)

    identities = np.repeat(np.arange(1, config.g + 1), counts).astype(str)
    return build_dataset(identities, embeddings=x, dissimilarity=SYNTHETIC_CONFIG["dissimilarity"])


def _threshold_for_rate(scores: np.ndarray, metric: Metric, target: float):
    ordered = np.sort(scores)
    n = len(ordered)
    k = int(round(target * n))
    if metric == "FAR":
        # impostor errs below t: k errors at the (k+1)-th smallest score
        t = ordered[k] if k < n else np.nextafter(ordered[-1], np.inf)
        achieved = np.searchsorted(ordered, t, side="left") / n
    else:
        # genuine errs at or above t: k errors at the k-th largest score
        t = ordered[n - k] if k > 0 else np.nextafter(ordered[-1], np.inf)
        achieved = (n - np.searchsorted(ordered, t, side="left")) / n
    return float(t), float(achieved)


def calibrate_threshold(config: SyntheticConfig, target_metric: Metric, target_value: float,
                        calibration_g: Optional[int] = None, calibration_m: Optional[int] = None) -> ThresholdCalibration:
    """Threshold at which a large calibration sample shows ``target_value`` for ``target_metric``.

    The achieved rate on the calibration sample is returned with the threshold and
    serves as the true value in coverage runs.
    """
    if target_metric not in ("FRR", "FAR"):
        raise InvalidInputError(f"unknown metric '{target_metric}'")
    if not (0.0 <= target_value <= 1.0):
        raise InvalidInputError(f"target rate must lie in [0, 1], got {target_value}")

    g = CALIBRATION_CONFIG["g"] if calibration_g is None else calibration_g
    m = CALIBRATION_CONFIG["m"] if calibration_m is None else calibration_m
    sample_config = config.model_copy(update={"g": g, "m": m, "m_min": None, "m_max": None})
    dataset = generate_synthetic(sample_config, stream_rng(config.seed, "calibration"))

    scores = impostor_scores(dataset) if target_metric == "FAR" else genuine_scores(dataset)
    threshold, achieved = _threshold_for_rate(scores, target_metric, target_value)

    exact = abs(achieved - target_value) <= 0.5 / len(scores)
    if not exact:
        logger.warning(f"{target_metric} target {target_value} not reachable on {len(scores)} scores; "
                       f"using nearest achievable rate {achieved:.6g}")
    logger.info(f"Calibrated {target_metric}={target_value} at t={threshold:.6g} "
                f"(achieved {achieved:.6g}, G={g}, M={m})")
    return ThresholdCalibration(metric=target_metric, target=target_value, threshold=threshold,
                                achieved_rate=achieved, n_scores=len(scores), calibration_g=g,
                                calibration_m=m, exact=exact)
