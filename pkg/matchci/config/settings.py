# Configuration settings for matchci
# Error-rate estimation and confidence intervals for matching tasks

import os

# Interval construction defaults
INTERVAL_CONFIG = {
    "alpha": 0.05,
    "alpha_far": None,  # None means "same as alpha"
    "frr_unbalanced_mode": "delta_independent",  # or delta_full
    "cap_at_naive": True,  # N* never exceeds the naive comparison count
}

# Bootstrap resampling
BOOTSTRAP_CONFIG = {
    "default_b": 1000,
    "min_b": 100,  # enforced for CLI runs that select a bootstrap method
    "max_redraws": 1000,  # double-or-nothing degenerate weight redraw cap
    "chunk_size": 128,  # replicates per random stream; fixed so output ignores thread count
    "index_tolerance": 1e-9,
    "schemes": ["subsets", "two_level", "vertex", "double_or_nothing"],
}

# Synthetic embedding generator
SYNTHETIC_CONFIG = {
    "dim": 128,
    "beta_scale": 1.0,  # rate of the exponential identity effect
    "noise_second_param": 5.0,
    "noise_mode": "variance",  # or stddev
    "dissimilarity": "euclidean",
}

# Large-sample threshold calibration
CALIBRATION_CONFIG = {
    "g": 200,
    "m": 10,
}

# Monte Carlo coverage runs
COVERAGE_CONFIG = {
    "replications": 500,
    "ci_alpha": 0.05,  # level of the Wilson interval on the hit proportion
}

# ROC analysis
ROC_CONFIG = {
    "far_tolerance": 1e-12,
    "default_scheme": "vertex",
    "bootstrap_schemes": ["subsets", "vertex", "double_or_nothing"],
}

# Protocol planner
PROTOCOL_CONFIG = {
    "max_search_nodes": 200000,  # balanced-order search budget before plain greedy
}

# CSV layouts
CSV_CONFIG = {
    "score_columns": ["id_a", "instance_a", "id_b", "instance_b", "score"],
    "embedding_id_columns": ["id", "instance"],
    "embedding_prefix": "v",
    "counts_columns": ["id", "instances"],
    "roc_columns": ["threshold", "frr", "far"],
    "plan_columns": ["iteration", "id_a", "instance_a", "id_b", "instance_b"],
}

# System Configuration
SYSTEM_CONFIG = {
    "version": "0.3.0",
    "log_level": "INFO",  # DEBUG, INFO, WARNING, ERROR
    "default_threads": os.cpu_count() or 1,
    "seed_env_var": "MATCHCI_SEED",
    "default_seed": 0,
}

# Process exit codes
EXIT_CODES = {
    "success": 0,
    "parse_error": 2,
    "precondition": 3,
    "resampling": 4,
}

# Method tags accepted by the ci and simulate commands
METHOD_TAGS = ["wilson", "naive-wilson", "subsets", "two-level", "vertex", "don"]


def validate_config():
    """Validate configuration settings"""
    errors = []

    if not 0.0 < INTERVAL_CONFIG["alpha"] < 1.0:
        errors.append(f"alpha must lie in (0, 1), got {INTERVAL_CONFIG['alpha']}")

    alpha_far = INTERVAL_CONFIG.get("alpha_far")
    if alpha_far is not None and not 0.0 < alpha_far < 1.0:
        errors.append(f"alpha_far must lie in (0, 1), got {alpha_far}")

    if INTERVAL_CONFIG["frr_unbalanced_mode"] not in ("delta_full", "delta_independent"):
        errors.append(f"Unknown FRR variance mode {INTERVAL_CONFIG['frr_unbalanced_mode']}")

    if BOOTSTRAP_CONFIG["default_b"] < BOOTSTRAP_CONFIG["min_b"]:
        errors.append("default bootstrap B is below the minimum B")

    if BOOTSTRAP_CONFIG["chunk_size"] < 1 or BOOTSTRAP_CONFIG["max_redraws"] < 1:
        errors.append("chunk_size and max_redraws must be positive")

    if SYNTHETIC_CONFIG["noise_mode"] not in ("variance", "stddev"):
        errors.append(f"Unknown noise mode {SYNTHETIC_CONFIG['noise_mode']}")

    if CALIBRATION_CONFIG["g"] < 2 or CALIBRATION_CONFIG["m"] < 2:
        errors.append("calibration sample needs at least 2 identities with 2 instances")

    for name, code in EXIT_CODES.items():
        if name != "success" and code == 0:
            errors.append(f"exit code for {name} must be non-zero")

    return errors


# Auto-validate on import
_validation_errors = validate_config()
if _validation_errors:
    import logging
    logger = logging.getLogger(__name__)
    for error in _validation_errors:
        logger.error(f"Configuration Error: {error}")
