from functools import cached_property
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from matchci.config.settings import BOOTSTRAP_CONFIG, METHOD_TAGS, SYNTHETIC_CONFIG, INTERVAL_CONFIG

Metric = Literal["FRR", "FAR"]
Setting = Literal["balanced", "unbalanced"]
Scheme = Literal["subsets", "two_level", "vertex", "double_or_nothing"]


class MatchDataset(BaseModel):
    """Identity-grouped instances with their pairwise dissimilarity scores.

    Instances are stored grouped by identity (identity 0 first, then 1, ...).
    ``scores`` holds one value per unordered instance pair in condensed order
    (row-major upper triangle, the layout of ``scipy.spatial.distance.pdist``);
    NaN marks a pair with no score.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    identities: Tuple[str, ...]
    instance_counts: np.ndarray
    instance_labels: Tuple[str, ...]
    scores: np.ndarray
    embeddings: Optional[np.ndarray] = None
    dissimilarity: Optional[str] = None

    @model_validator(mode="after")
    def _check_shapes(self):
        counts = np.asarray(self.instance_counts)
        if len(self.identities) != len(counts):
            raise ValueError("one instance count per identity required")
        if len(set(self.identities)) != len(self.identities):
            raise ValueError("identity labels must be unique")
        if np.any(counts < 1):
            raise ValueError("every identity needs at least one instance")
        n = int(counts.sum())
        if len(self.instance_labels) != n:
            raise ValueError(f"expected {n} instance labels, got {len(self.instance_labels)}")
        if len(self.scores) != n * (n - 1) // 2:
            raise ValueError(f"expected {n * (n - 1) // 2} pair scores, got {len(self.scores)}")
        if self.embeddings is not None and self.embeddings.shape[0] != n:
            raise ValueError("embedding rows must match the instance count")
        return self

    @property
    def g(self) -> int:
        return len(self.identities)

    @property
    def n_instances(self) -> int:
        return int(np.sum(self.instance_counts))

    @property
    def is_balanced(self) -> bool:
        return bool(np.all(self.instance_counts == self.instance_counts[0]))

    @cached_property
    def instance_identity(self) -> np.ndarray:
        return np.repeat(np.arange(self.g), self.instance_counts)

    @cached_property
    def instance_index(self) -> np.ndarray:
        """1-based position of every instance inside its identity."""
        starts = np.concatenate(([0], np.cumsum(self.instance_counts)[:-1]))
        return np.arange(self.n_instances) - np.repeat(starts, self.instance_counts) + 1

    @cached_property
    def pair_instances(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.triu_indices(self.n_instances, k=1)

    @cached_property
    def pair_identities(self) -> Tuple[np.ndarray, np.ndarray]:
        a, b = self.pair_instances
        return self.instance_identity[a], self.instance_identity[b]

    @cached_property
    def genuine_mask(self) -> np.ndarray:
        ia, ib = self.pair_identities
        return ia == ib

    def instance_key(self, instance: int) -> Tuple[str, str]:
        return self.identities[self.instance_identity[instance]], self.instance_labels[instance]


class ComparisonOutcome(BaseModel):
    """Binary error indicator of one comparison; identities are 0-based positions, instances 1-based."""
    model_config = ConfigDict(frozen=True)

    identity_a: int = Field(ge=0)
    instance_a: int = Field(ge=1)
    identity_b: int = Field(ge=0)
    instance_b: int = Field(ge=1)
    value: Literal[0, 1]

    @model_validator(mode="after")
    def _not_self_pair(self):
        if (self.identity_a, self.instance_a) == (self.identity_b, self.instance_b):
            raise ValueError("a comparison of an instance with itself is undefined")
        return self

    @property
    def pair(self) -> Tuple[Tuple[int, int], Tuple[int, int]]:
        return (self.identity_a, self.instance_a), (self.identity_b, self.instance_b)

    @property
    def genuine(self) -> bool:
        return self.identity_a == self.identity_b


class PairAggregates(BaseModel):
    """Identity-level means of the comparison outcomes at one threshold."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    g: int = Field(ge=1)
    y_bar: np.ndarray
    counts: np.ndarray
    m_tilde: np.ndarray
    instance_counts: np.ndarray
    threshold: Optional[float] = None

    @model_validator(mode="after")
    def _check_cells(self):
        m = np.asarray(self.instance_counts)
        if self.y_bar.shape != (self.g, self.g) or self.counts.shape != (self.g, self.g):
            raise ValueError("y_bar and counts must be G x G")
        if np.any(self.y_bar < 0.0) or np.any(self.y_bar > 1.0):
            raise ValueError("identity-level means must lie in [0, 1]")
        if not np.array_equal(self.y_bar, self.y_bar.T):
            raise ValueError("y_bar must be symmetric")
        expected = np.outer(m, m)
        np.fill_diagonal(expected, m * (m - 1))
        if not np.array_equal(self.counts, expected):
            raise ValueError("counts must be M_i(M_i - 1) on the diagonal and M_i M_j elsewhere")
        return self

    @classmethod
    def from_matrix(cls, y_bar, instance_counts, threshold: Optional[float] = None) -> "PairAggregates":
        y_bar = np.array(y_bar, dtype=float)
        m = np.asarray(instance_counts, dtype=np.int64)
        if m.ndim == 0:
            m = np.full(y_bar.shape[0], int(m), dtype=np.int64)
        counts = np.outer(m, m)
        np.fill_diagonal(counts, m * (m - 1))
        return cls(g=len(m), y_bar=y_bar, counts=counts, m_tilde=m * (m - 1),
                   instance_counts=m, threshold=threshold)

    @property
    def is_balanced(self) -> bool:
        return bool(np.all(self.instance_counts == self.instance_counts[0]))

    @property
    def setting(self) -> Setting:
        return "balanced" if self.is_balanced else "unbalanced"


class OutcomeStore(BaseModel):
    """Per-identity outcome tallies used by the second stage of two-level resampling."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    within_ones: np.ndarray
    within_total: np.ndarray
    cross_ones: np.ndarray
    cross_total: np.ndarray
    threshold: Optional[float] = None


class ErrorEstimate(BaseModel):
    metric: Metric
    value: float = Field(ge=0.0, le=1.0)
    n_effective_naive: int = Field(ge=0)
    setting: Setting


class VarianceEstimate(BaseModel):
    target: Metric
    scaled_variance: float = Field(ge=0.0)
    raw_variance: float
    clamped: bool = False
    components: Optional[Dict[str, float]] = None
    estimator: Literal["plugin", "jackknife", "unbalanced_delta"]
    mode: Optional[str] = None

    @model_validator(mode="after")
    def _flag_matches(self):
        if self.raw_variance < 0 and not self.clamped:
            raise ValueError("negative raw variance must carry the clamped flag")
        return self


class EffectiveSampleSize(BaseModel):
    value: float = Field(gt=0.0)
    kind: Literal["naive", "adjusted"]
    floor_applied: bool = False
    cap_applied: bool = False
    ratio: Optional[float] = None


class IntervalResult(BaseModel):
    metric: Metric
    method: str
    lower: float
    upper: float
    point: float
    alpha: float = Field(gt=0.0, lt=1.0)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _ordered(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise ValueError(f"interval [{self.lower}, {self.upper}] is not inside [0, 1]")
        return self

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


class WeightVector(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w: np.ndarray
    scheme: Literal["multinomial", "double_or_nothing"]

    @model_validator(mode="after")
    def _conforms(self):
        if np.any(self.w < 0):
            raise ValueError("weights must be non-negative")
        if self.scheme == "multinomial" and int(self.w.sum()) != len(self.w):
            raise ValueError("multinomial weights must sum to G")
        if self.scheme == "double_or_nothing" and not np.all(np.isin(self.w, (0, 2))):
            raise ValueError("double-or-nothing weights must be 0 or 2")
        return self


class BootstrapDistribution(BaseModel):
    replicates: List[float]
    scheme: Scheme
    metric: Metric
    b: int = Field(ge=1)
    seed: int = Field(ge=0)
    rejected_draws: int = Field(default=0, ge=0)
    point: Optional[float] = None
    setting: Optional[Setting] = None

    @model_validator(mode="after")
    def _check_replicates(self):
        if len(self.replicates) != self.b:
            raise ValueError(f"expected {self.b} replicates, got {len(self.replicates)}")
        if any(not 0.0 <= r <= 1.0 for r in self.replicates):
            raise ValueError("replicates must lie in [0, 1]")
        return self

    @property
    def sorted_replicates(self) -> List[float]:
        return sorted(self.replicates)


class EmpiricalRoc(BaseModel):
    thresholds: List[float]
    frr_at: List[float]
    far_at: List[float]
    n_genuine: int = Field(ge=1)
    n_impostor: int = Field(ge=1)

    @model_validator(mode="after")
    def _monotone(self):
        if not (len(self.thresholds) == len(self.frr_at) == len(self.far_at)):
            raise ValueError("thresholds, frr_at and far_at must align")
        far = np.asarray(self.far_at)
        frr = np.asarray(self.frr_at)
        if np.any(np.diff(far) < 0) or np.any(np.diff(frr) > 0):
            raise ValueError("FAR must be nondecreasing and FRR nonincreasing in the threshold")
        return self


class RocPointInterval(BaseModel):
    target_far: float = Field(ge=0.0, le=1.0)
    threshold_used: float
    interval: IntervalResult
    method: Literal["parametric_nested", "bootstrap_vertical"]
    alpha_far: Optional[float] = None


class Budget(BaseModel):
    b: int = Field(ge=1)


class ProtocolSelection(BaseModel):
    iteration: int = Field(ge=1)
    id_a: str
    instance_a: int = Field(ge=1)
    id_b: str
    instance_b: int = Field(ge=1)


class ProtocolPlan(BaseModel):
    metric: Metric
    budget: int = Field(ge=1)
    selections: List[ProtocolSelection]
    objective_value: int = Field(ge=0)
    truncated: bool = False
    search: Literal["balanced", "greedy"] = "balanced"

    @model_validator(mode="after")
    def _no_duplicates(self):
        seen = set()
        for s in self.selections:
            key = tuple(sorted([(s.id_a, s.instance_a), (s.id_b, s.instance_b)]))
            if key in seen:
                raise ValueError(f"comparison {key} selected twice")
            seen.add(key)
        return self


class SyntheticConfig(BaseModel):
    g: int = Field(ge=2)
    m: int = Field(default=5, ge=2)
    dim: int = Field(default=SYNTHETIC_CONFIG["dim"], ge=1)
    beta_scale: float = Field(default=SYNTHETIC_CONFIG["beta_scale"], gt=0.0)
    noise_second_param: float = Field(default=SYNTHETIC_CONFIG["noise_second_param"], ge=0.0)
    noise_mode: Literal["variance", "stddev"] = SYNTHETIC_CONFIG["noise_mode"]
    m_min: Optional[int] = Field(default=None, ge=1)
    m_max: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _range(self):
        if (self.m_min is None) != (self.m_max is None):
            raise ValueError("m_min and m_max must be given together")
        if self.m_min is not None and self.m_min > self.m_max:
            raise ValueError("m_min must not exceed m_max")
        return self

    @property
    def balanced(self) -> bool:
        return self.m_min is None

    @property
    def noise_sd(self) -> float:
        if self.noise_mode == "variance":
            return float(np.sqrt(self.noise_second_param))
        return float(self.noise_second_param)


class ThresholdCalibration(BaseModel):
    metric: Metric
    target: float = Field(ge=0.0, le=1.0)
    threshold: float
    achieved_rate: float = Field(ge=0.0, le=1.0)
    n_scores: int
    calibration_g: int
    calibration_m: int
    exact: bool = True


class CoverageTruth(BaseModel):
    metric: Metric
    value: float = Field(ge=0.0, le=1.0)


class ReplicationRecord(BaseModel):
    replication: int
    method: str
    lower: Optional[float] = None
    upper: Optional[float] = None
    hit: Optional[bool] = None
    error: Optional[str] = None


class MethodCoverage(BaseModel):
    method: str
    replications: int = Field(ge=0)
    hits: int = Field(ge=0)
    coverage: Optional[float] = None
    coverage_lower: Optional[float] = None
    coverage_upper: Optional[float] = None
    mean_width: Optional[float] = None
    failures: int = 0
    last_error: Optional[str] = None


class CoverageReport(BaseModel):
    truth: CoverageTruth
    threshold: float
    alpha: float
    replications: int
    seed: int
    config: SyntheticConfig
    methods: List[MethodCoverage]
    replication_log: Optional[List[ReplicationRecord]] = None

    def method(self, tag: str) -> MethodCoverage:
        for entry in self.methods:
            if entry.method == tag:
                return entry
        raise KeyError(tag)


class ScoreRecord(BaseModel):
    id_a: str
    instance_a: str
    id_b: str
    instance_b: str
    score: float

    @model_validator(mode="after")
    def _not_self_pair(self):
        if (self.id_a, self.instance_a) == (self.id_b, self.instance_b):
            raise ValueError("self-comparison")
        return self

    @property
    def key(self) -> Tuple[Tuple[str, str], Tuple[str, str]]:
        a, b = (self.id_a, self.instance_a), (self.id_b, self.instance_b)
        return (a, b) if a <= b else (b, a)


BOOTSTRAP_TAGS = {"subsets", "two-level", "vertex", "don"}


class RunConfig(BaseModel):
    command: Literal["estimate", "ci", "roc", "protocol", "simulate"]
    scores_path: Optional[str] = None
    embeddings_path: Optional[str] = None
    counts_path: Optional[str] = None
    dissimilarity: Literal["euclidean", "cosine"] = "euclidean"
    similarity: bool = False
    threshold: Optional[float] = None
    metric: Optional[Metric] = None
    target_metric: Optional[Metric] = None
    target_value: Optional[float] = None
    methods: List[str] = Field(default_factory=list)
    roc_method: Optional[Literal["parametric", "bootstrap"]] = None
    scheme: Optional[Scheme] = None
    alpha: float = INTERVAL_CONFIG["alpha"]
    alpha_far: Optional[float] = None
    b: int = BOOTSTRAP_CONFIG["default_b"]
    seed: int = Field(default=0, ge=0)
    output: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1)
    options: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("alpha")
    @classmethod
    def _alpha_open_unit(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {value}")
        return value

    @field_validator("alpha_far")
    @classmethod
    def _alpha_far_open_unit(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 < value < 1.0:
            raise ValueError(f"alpha_far must lie in (0, 1), got {value}")
        return value

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, value: List[str]) -> List[str]:
        unknown = [m for m in value if m not in METHOD_TAGS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHOD_TAGS}")
        return value

    @property
    def uses_bootstrap(self) -> bool:
        return bool(BOOTSTRAP_TAGS.intersection(self.methods)) or self.roc_method == "bootstrap"

    @model_validator(mode="after")
    def _bootstrap_size(self):
        if self.uses_bootstrap and self.b < BOOTSTRAP_CONFIG["min_b"]:
            raise ValueError(f"bootstrap methods need B >= {BOOTSTRAP_CONFIG['min_b']}, got {self.b}")
        return self

    def reproducibility_dump(self) -> Dict[str, Any]:
        """Configuration as recorded in result files; the thread count never changes a number."""
        return self.model_dump(exclude={"threads"})
