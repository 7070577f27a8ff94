from pydantic import Field

from cchmm.schemas.common import BaseSchema


class LossReport(BaseSchema):
    recon_nll: float
    kl_eps: float
    kl_z: float
    pred_l2: float
    acyclicity: float
    total: float


class EpochRecord(LossReport):
    """One line of log.jsonl; forecast metrics are only filled for the validation split."""

    epoch: int
    split: str
    mae: float | None = None
    rmse: float | None = None
    mape: float | None = None


class ModalityMetrics(BaseSchema):
    mae: float
    rmse: float
    # None when no truth entry reaches the mask threshold
    mape: float | None = None


class MetricReport(BaseSchema):
    modalities: dict[str, ModalityMetrics]
    mean_mae: float
    mean_rmse: float
    mean_mape: float | None = None


class GraphRecoveryReport(BaseSchema):
    auc: float | None = None
    f1: float | None = None
    precision: float | None = None
    recall: float | None = None
    structural_hamming: int
    threshold: float = 0.1


class GradientCheckReport(BaseSchema):
    passed: bool
    tolerance: float
    max_rel_err: float
    worst_parameter: str
    worst_op: str | None = None
    checked_elements: int
    groups: dict[str, float] = Field(default_factory=dict)


class EvaluationReport(BaseSchema):
    split: str
    windows: int
    variant: str | None = None
    model: MetricReport | None = None
    baselines: dict[str, MetricReport] = Field(default_factory=dict)
    graph_recovery: GraphRecoveryReport | None = None
    acyclicity: float | None = None


class VariantRun(BaseSchema):
    """Test-split outcome of one training run in the reference experiment."""

    variant: str
    seed: int
    best_epoch: int
    mae: dict[str, float]
    persistence_ratio: dict[str, float]
    auc: float | None = None
    acyclicity: float
    recon_curve: list[float]


class VariantSummary(BaseSchema):
    variant: str
    seeds: list[int]
    mae: dict[str, float]
    persistence_ratio: dict[str, float]
    auc: float | None = None
    acyclicity: float
    recon_curve: list[float]


class AcceptanceReport(BaseSchema):
    beats_persistence: bool
    recovers_graph: bool
    acyclic: bool
    speed_ordering: bool

    @property
    def passed(self) -> bool:
        return self.beats_persistence and self.recovers_graph and self.acyclic and self.speed_ordering


class ReferenceReport(BaseSchema):
    scenario_seed: int
    epochs: int
    runs: list[VariantRun]
    summaries: dict[str, VariantSummary]
    acceptance: AcceptanceReport
