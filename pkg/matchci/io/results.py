"""JSON result documents: {version, seed, config, results}."""

import json
import logging
import sys
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel

from matchci.config.settings import SYSTEM_CONFIG
from matchci.models.match_models import IntervalResult
from matchci.utils.errors import DataError

logger = logging.getLogger(__name__)


def _to_json(obj: Any):
    if isinstance(obj, BaseModel):
        return obj.model_dump()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def result_envelope(config: Dict[str, Any], seed: int, results: Any) -> Dict[str, Any]:
    return {
        "version": SYSTEM_CONFIG["version"],
        "seed": seed,
        "config": config,
        "results": results,
    }


def dumps_result(document: Dict[str, Any]) -> str:
    # floats go out as repr, so reading back reproduces them exactly
    return json.dumps(document, sort_keys=True, indent=2, default=_to_json) + "\n"


def write_result_json(document: Dict[str, Any], path: Optional[str] = None) -> str:
    text = dumps_result(document)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as handle:
            handle.write(text)
        logger.info(f"Results written to {path}")
    return text


def read_result_json(path: str) -> Dict[str, Any]:
    try:
        with open(path) as handle:
            document = json.load(handle)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}")
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON in {path}: {e.msg}", line=e.lineno)
    for key in ("version", "seed", "config", "results"):
        if key not in document:
            raise DataError(f"{path} is not a result document: missing '{key}'")
    return document


def read_interval_results(path: str) -> List[IntervalResult]:
    """Successful interval entries of a ci document; error entries are skipped."""
    results = read_result_json(path)["results"]
    return [IntervalResult.model_validate(entry) for entry in results if entry.get("status", "ok") == "ok"]
