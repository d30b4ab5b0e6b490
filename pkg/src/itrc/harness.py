"""End-to-end trial orchestration, the model matrix runner, and reports."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .clustering import kmeans_fit
from .fusion import MODEL_MATRIX, MlpConfig, fuse, predict, train_classifier
from .gcn import GcnConfig, extract_edge_embeddings, node_predictions, train_gcn
from .graph import (build_itrc_graph, label_edges, node_count_stats, reduce_edges,
                    to_line_graph)
from .metrics import MetricsReport, compute_metrics
from .rng import SeededRng
from .store import LABELS, EmbeddingStore, split

METRIC_KEYS = ("similar_precision", "similar_recall", "similar_f1",
               "complementary_precision", "complementary_recall", "complementary_f1",
               "macro_f1", "accuracy")


class StageError(RuntimeError):
    """Wraps a pipeline failure with the stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    """Hyperparameters for one trial; defaults follow the full-scale setup."""

    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    k: int = 100
    kmeans_max_iter: int = 100
    j: int = 5
    remove_same_label: bool = True
    add_knn: bool = True
    reduction_order: str = "remove-then-add"
    gcn: GcnConfig = field(default_factory=GcnConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)


@dataclass
class TrialResult:
    model_name: str
    seed: int
    metrics: MetricsReport
    graph_stats: Optional[dict] = None
    gcn_node_metrics: Optional[MetricsReport] = None
    stages: list[str] = field(default_factory=list)
    mlp_best_epoch: int = 0
    mlp_val_loss: float = 0.0
    test_pair_ids: list[str] = field(default_factory=list)
    test_predictions: list[str] = field(default_factory=list)


def _stage_seeds(seed: int) -> dict[str, int]:
    root = SeededRng(seed)
    return {tag: root.child(tag).seed
            for tag in ("split", "kmeans-text", "kmeans-image", "labels", "gcn", "mlp")}


def run_trial(store: EmbeddingStore, model_name: str, cfg: PipelineConfig,
              seed: int) -> TrialResult:
    """Execute split -> cluster -> graph -> GCN -> fuse -> classify -> metrics.

    Models without the edge vector skip the cluster/graph/GCN stages.
    Any stage failure is re-raised as :class:`StageError` naming the stage.
    """
    if model_name not in MODEL_MATRIX:
        raise ValueError(f"unknown model {model_name!r}; expected one of {sorted(MODEL_MATRIX)}")
    spec = MODEL_MATRIX[model_name]
    seeds = _stage_seeds(seed)
    stages: list[str] = []

    def run(stage: str, fn):
        stages.append(stage)
        try:
            return fn()
        except Exception as exc:
            raise StageError(stage, exc) from exc

    assignment = run("split", lambda: split(store.n, cfg.ratios, seeds["split"]))

    v_edge = None
    graph_stats = None
    gcn_metrics = None
    if spec.use_edge:
        text_model = run("cluster-text", lambda: kmeans_fit(
            store.text_matrix, cfg.k, seeds["kmeans-text"], cfg.kmeans_max_iter, "text"))
        image_model = run("cluster-image", lambda: kmeans_fit(
            store.image_matrix, cfg.k, seeds["kmeans-image"], cfg.kmeans_max_iter, "image"))
        graph = run("build-graph", lambda: build_itrc_graph(store, text_model, image_model))
        run("label-edges", lambda: label_edges(graph, store, assignment, seeds["labels"]))
        lg_full = run("line-graph", lambda: to_line_graph(graph))
        lg = run("reduce-edges", lambda: reduce_edges(
            lg_full, cfg.j, cfg.remove_same_label, cfg.add_knn, cfg.reduction_order))
        gcn_result = run("train-gcn", lambda: train_gcn(lg, cfg.gcn, seeds["gcn"]))
        v_edge = run("extract-edges", lambda: extract_edge_embeddings(gcn_result.model, lg, store))
        test_nodes = ~lg.train_mask
        if test_nodes.any():
            node_preds = node_predictions(gcn_result.model, lg)
            gcn_metrics = compute_metrics([LABELS[i] for i in node_preds[test_nodes]],
                                          [LABELS[i] for i in lg.labels[test_nodes]])
        graph_stats = dict(lg.stats)
        graph_stats.update(node_count_stats(lg))

    fused = run("fuse", lambda: fuse(spec, v_text=store.text_matrix,
                                     v_image=store.image_matrix, v_edge=v_edge))
    y = store.label_indices()
    tr, va, te = assignment.train_indices, assignment.val_indices, assignment.test_indices
    mlp_result = run("train-classifier", lambda: train_classifier(
        fused[tr], y[tr], fused[va], y[va], cfg.mlp, seeds["mlp"]))
    preds, _ = run("predict", lambda: predict(mlp_result.model, fused[te]))
    pred_labels = [LABELS[i] for i in preds]
    report = run("metrics", lambda: compute_metrics(
        pred_labels, [store.records[i].label for i in te]))
    return TrialResult(model_name=model_name, seed=seed, metrics=report,
                       graph_stats=graph_stats, gcn_node_metrics=gcn_metrics,
                       stages=stages, mlp_best_epoch=mlp_result.best_epoch,
                       mlp_val_loss=mlp_result.best_val_loss,
                       test_pair_ids=[store.records[i].pair_id for i in te],
                       test_predictions=pred_labels)


@dataclass
class ModelSummary:
    model_name: str
    trials: list[TrialResult]
    means: dict[str, float]
    variances: dict[str, float]


def summarize_trials(model_name: str, trials: Sequence[TrialResult]) -> ModelSummary:
    values = {key: [] for key in METRIC_KEYS}
    for t in trials:
        flat = t.metrics.to_dict()
        for key in METRIC_KEYS:
            values[key].append(flat[key])
    means = {k: float(np.mean(v)) for k, v in values.items()}
    variances = {k: float(np.var(v, ddof=1)) if len(v) > 1 else 0.0
                 for k, v in values.items()}
    return ModelSummary(model_name=model_name, trials=list(trials),
                        means=means, variances=variances)


def run_matrix(store: EmbeddingStore, model_names: Sequence[str], trials: int,
               base_seed: int, cfg: PipelineConfig) -> list[ModelSummary]:
    """Mean/variance per metric per model; trial seeds are base_seed + index."""
    if trials < 1:
        raise ValueError(f"run_matrix: trials must be >= 1, got {trials}")
    summaries = []
    for name in model_names:
        results = [run_trial(store, name, cfg, base_seed + i) for i in range(trials)]
        summaries.append(summarize_trials(name, results))
    return summaries


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def report_csv(summaries: Sequence[ModelSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["model"] + list(METRIC_KEYS) + [f"{k}_var" for k in METRIC_KEYS]
    writer.writerow(header)
    for s in summaries:
        writer.writerow([s.model_name]
                        + [_fmt(s.means[k]) for k in METRIC_KEYS]
                        + [_fmt(s.variances[k]) for k in METRIC_KEYS])
    return buf.getvalue()


def report_markdown(summaries: Sequence[ModelSummary]) -> str:
    lines = [
        "| Model | Similar P | Similar R | Similar F1 | Complementary P | Complementary R "
        "| Complementary F1 | Macro F1 | Accuracy |",
        "|---|---|---|---|---|---|---|---|---|",
    ]
    for s in summaries:
        cells = " | ".join(_fmt(s.means[k]) for k in METRIC_KEYS)
        lines.append(f"| {s.model_name} | {cells} |")
    return "\n".join(lines) + "\n"


def emit_report(summaries: Sequence[ModelSummary], path, fmt: str = "csv") -> str:
    """Write the aggregated table; returns the rendered text."""
    if not summaries:
        raise ValueError("emit_report: no results to report")
    if fmt == "csv":
        text = report_csv(summaries)
    elif fmt in ("md", "markdown"):
        text = report_markdown(summaries)
    else:
        raise ValueError(f"emit_report: unknown format {fmt!r}")
    Path(path).write_text(text)
    return text
