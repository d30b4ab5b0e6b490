"""Request/response models for the pipeline service.

Endpoints exchange filesystem paths and scalar config, never raw
embedding payloads; artifacts stay on disk in the formats the CLI and
tests consume directly.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"


class ErrorDetail(BaseModel):
    stage: str
    message: str


class IngestRequest(BaseModel):
    dir: str


class IngestResponse(BaseModel):
    dir: str
    n: int
    dim: int
    label_counts: dict[str, int]


class SynthRequest(BaseModel):
    n: int = Field(ge=4)
    separation: float = Field(ge=0)
    seed: int = 0
    out: str


class SynthResponse(BaseModel):
    out: str
    n: int
    dim: int


class ClusterRequest(BaseModel):
    store: str
    k: int = 100
    seed: int = 0
    max_iter: int = 100
    out: str


class ModalityClusterInfo(BaseModel):
    objective: float
    iterations: int


class ClusterResponse(BaseModel):
    out: str
    k: int
    text: ModalityClusterInfo
    image: ModalityClusterInfo


class BuildGraphRequest(BaseModel):
    store: str
    clusters: str
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    j: int = 5
    seed: int = 0
    remove_same_label: bool = True
    add_knn: bool = True
    order: str = "remove-then-add"
    out: str


class BuildGraphResponse(BaseModel):
    out: str
    stats: dict


class GcnParams(BaseModel):
    epochs: int = 100
    lr: float = 0.005
    layers: int = 64
    alpha: float = 0.1
    lam: float = 0.5
    dropout: float = 0.5
    leaky_slope: float = 0.01
    channels: Optional[int] = None


class TrainGcnRequest(GcnParams):
    graph: str
    seed: int = 0
    out: str
    metrics_out: Optional[str] = None


class TrainGcnResponse(BaseModel):
    out: str
    metrics_out: Optional[str]
    final_loss: float
    node_metrics: Optional[dict] = None


class MlpParams(BaseModel):
    hidden1: int = 256
    hidden2: int = 64
    mlp_dropout: float = 0.5
    mlp_epochs: int = 100
    batch_size: int = 4
    mlp_lr: float = 0.001
    patience: int = 10


class TrainClfRequest(MlpParams):
    store: str
    edges: str
    model: str
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0
    out: str


class TrainClfResponse(BaseModel):
    out: str
    model: str
    best_epoch: int
    val_loss: float
    test_metrics: dict


class ExperimentRequest(GcnParams, MlpParams):
    store: str
    models: list[str]
    trials: int = 10
    seed: int = 0
    report: str
    format: str = "csv"
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    k: int = 100
    kmeans_max_iter: int = 100
    j: int = 5
    remove_same_label: bool = True
    add_knn: bool = True
    order: str = "remove-then-add"


class ModelRow(BaseModel):
    model: str
    means: dict[str, float]
    variances: dict[str, float]


class ExperimentResponse(BaseModel):
    report: str
    format: str
    rows: list[ModelRow]
