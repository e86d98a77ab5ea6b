"""
CSV ingestion and export.

Inputs: pairwise scores (id_a,instance_a,id_b,instance_b,score), embeddings
(id,instance,v0..v{d-1}) and instance counts (id,instances). Outputs: ROC curve,
protocol plan, coverage summary, per-replication log and bootstrap distributions.
Data errors carry the 1-based line number of the offending row (header is line 1).
"""

import json
import logging
from typing import Dict, List, TextIO, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from matchci.config.settings import CSV_CONFIG
from matchci.data.dataset import build_dataset
from matchci.models.match_models import (
    BootstrapDistribution, CoverageReport, EmpiricalRoc, MatchDataset, ProtocolPlan, ProtocolSelection,
    ReplicationRecord, ScoreRecord,
)
from matchci.utils.errors import DataError

logger = logging.getLogger(__name__)

Target = Union[str, TextIO]


def _line(row_index: int) -> int:
    return int(row_index) + 2


def _read_frame(path: str, required: List[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}")
    except pd.errors.EmptyDataError:
        raise DataError(f"{path} is empty", line=1)
    except pd.errors.ParserError as e:
        raise DataError(f"cannot parse {path}: {e}")
    except UnicodeDecodeError as e:
        raise DataError(f"{path} is not valid text: {e}")

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataError(f"{path} lacks columns {missing}; expected {required}", line=1)
    if frame.empty:
        raise DataError(f"{path} has a header but no rows", line=2)
    for column in required:
        blank = frame.index[frame[column].str.strip() == ""]
        if len(blank):
            raise DataError(f"empty '{column}' value", line=_line(blank[0]))
    return frame


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column].str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if len(bad):
        raise DataError(f"'{column}' value '{frame[column].iloc[bad[0]]}' is not a finite number",
                        line=_line(bad[0]))
    return values


def read_score_csv(path: str, similarity: bool = False) -> MatchDataset:
    """Read pairwise scores; with ``similarity`` scores are negated so larger means less alike.

    Self-comparisons and duplicated pairs (in either orientation) are rejected.
    Pairs absent from the file stay missing in the dataset.
    """
    columns = CSV_CONFIG["score_columns"]
    frame = _read_frame(path, columns)
    id_a, inst_a, id_b, inst_b, _ = columns
    scores = _numeric(frame, columns[4])
    if similarity:
        scores = -scores

    a_keys = list(zip(frame[id_a].str.strip(), frame[inst_a].str.strip()))
    b_keys = list(zip(frame[id_b].str.strip(), frame[inst_b].str.strip()))

    instances: Dict[tuple, int] = {}
    seen: Dict[tuple, int] = {}
    for row, (a, b, score) in enumerate(zip(a_keys, b_keys, scores)):
        try:
            record = ScoreRecord(id_a=a[0], instance_a=a[1], id_b=b[0], instance_b=b[1], score=score)
        except ValidationError as e:
            raise DataError(f"invalid score row for {a} - {b}: {e.errors()[0]['msg']}",
                            line=_line(row), pair=(a, b))
        key = record.key
        if key in seen:
            raise DataError(f"pair {key[0]} - {key[1]} already given on line {seen[key]}",
                            line=_line(row), pair=key)
        seen[key] = _line(row)
        instances.setdefault(a, len(instances))
        instances.setdefault(b, len(instances))

    n = len(instances)
    i = np.array([instances[a] for a in a_keys])
    j = np.array([instances[b] for b in b_keys])
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    condensed = np.full(n * (n - 1) // 2, np.nan)
    condensed[n * lo - lo * (lo + 1) // 2 + hi - lo - 1] = scores

    keys = list(instances)
    dataset = build_dataset([k[0] for k in keys], [k[1] for k in keys], scores=condensed)
    n_missing = int(np.isnan(dataset.scores).sum())
    logger.info(f"Loaded {len(frame)} scores for {dataset.g} identities / {n} instances from {path}"
                + (f" ({n_missing} pairs missing)" if n_missing else ""))
    return dataset


def read_embedding_csv(path: str, dissimilarity: str = "euclidean") -> MatchDataset:
    id_col, inst_col = CSV_CONFIG["embedding_id_columns"]
    prefix = CSV_CONFIG["embedding_prefix"]
    frame = _read_frame(path, [id_col, inst_col])

    vector_cols = [c for c in frame.columns if c.startswith(prefix) and c[len(prefix):].isdigit()]
    vector_cols.sort(key=lambda c: int(c[len(prefix):]))
    if not vector_cols or [int(c[len(prefix):]) for c in vector_cols] != list(range(len(vector_cols))):
        raise DataError(f"embedding columns must be {prefix}0..{prefix}<d-1>", line=1)

    keys = list(zip(frame[id_col].str.strip(), frame[inst_col].str.strip()))
    duplicated = pd.Series(keys).duplicated()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated.to_numpy())[0])
        raise DataError(f"instance {keys[row]} listed twice", line=_line(row))

    embeddings = np.column_stack([_numeric(frame, c) for c in vector_cols])
    dataset = build_dataset([k[0] for k in keys], [k[1] for k in keys], embeddings=embeddings,
                            dissimilarity=dissimilarity)
    logger.info(f"Loaded {len(keys)} embeddings of dimension {len(vector_cols)} from {path}")
    return dataset


def read_counts_csv(path: str) -> Dict[str, int]:
    """Instance count per identity, in file order."""
    id_col, count_col = CSV_CONFIG["counts_columns"]
    frame = _read_frame(path, [id_col, count_col])
    values = _numeric(frame, count_col)
    counts: Dict[str, int] = {}
    for row, (identity, value) in enumerate(zip(frame[id_col].str.strip(), values)):
        if value != int(value) or value < 1:
            raise DataError(f"instance count must be a positive integer, got {frame[count_col].iloc[row]}",
                            line=_line(row))
        if identity in counts:
            raise DataError(f"identity {identity} listed twice", line=_line(row))
        counts[identity] = int(value)
    return counts


def write_roc_csv(roc: EmpiricalRoc, target: Target):
    pd.DataFrame({
        "threshold": roc.thresholds,
        "frr": roc.frr_at,
        "far": roc.far_at,
    })[CSV_CONFIG["roc_columns"]].to_csv(target, index=False)


def read_roc_csv(path: str) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = [c for c in CSV_CONFIG["roc_columns"] if c not in frame.columns]
    if missing:
        raise DataError(f"{path} lacks columns {missing}", line=1)
    return frame


def write_plan_csv(plan: ProtocolPlan, target: Target):
    rows = [s.model_dump() for s in plan.selections]
    pd.DataFrame(rows, columns=CSV_CONFIG["plan_columns"]).to_csv(target, index=False)


def read_plan_csv(path: str) -> List[ProtocolSelection]:
    frame = pd.read_csv(path, dtype={"id_a": str, "id_b": str})
    return [ProtocolSelection(**row) for row in frame.to_dict(orient="records")]


def write_coverage_csv(report: CoverageReport, target: Target):
    rows = []
    for entry in report.methods:
        row = entry.model_dump()
        row.update({"metric": report.truth.metric, "truth": report.truth.value,
                    "threshold": report.threshold, "alpha": report.alpha, "seed": report.seed})
        rows.append(row)
    pd.DataFrame(rows).to_csv(target, index=False)


def write_replication_log(records: List[ReplicationRecord], target: Target):
    pd.DataFrame([r.model_dump() for r in records],
                 columns=list(ReplicationRecord.model_fields)).to_csv(target, index=False)


def write_distribution_csv(dist: BootstrapDistribution, path: str):
    """Replicates in draw order under a '#'-prefixed JSON header with the metadata."""
    header = dist.model_dump(exclude={"replicates"})
    with open(path, "w", newline="") as handle:
        handle.write("# " + json.dumps(header, sort_keys=True) + "\n")
        pd.DataFrame({"replicate": dist.replicates}).to_csv(handle, index=False)


def read_distribution_csv(path: str) -> BootstrapDistribution:
    with open(path) as handle:
        first = handle.readline()
        if not first.startswith("#"):
            raise DataError(f"{path} has no distribution header", line=1)
        try:
            header = json.loads(first[1:])
        except json.JSONDecodeError as e:
            raise DataError(f"bad distribution header: {e}", line=1)
        frame = pd.read_csv(handle)
    return BootstrapDistribution(replicates=frame["replicate"].tolist(), **header)

