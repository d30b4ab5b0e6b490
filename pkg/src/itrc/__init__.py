"""Image-text relation classification: clustered relation graphs, a line-graph
GCN encoder, and fused-vector MLP classifiers, with a service + CLI front."""

__version__ = "0.1.0"

from .clustering import ClusterModel, kmeans_fit, objective
from .fusion import MODEL_MATRIX, FusionSpec, MlpConfig, fuse, predict, train_classifier
from .gcn import GcnConfig, extract_edge_embeddings, gcn2conv, model_forward, train_gcn
from .graph import (ItrcGraph, LineGraph, build_itrc_graph, label_edges,
                    normalized_adjacency, reduce_edges, to_line_graph)
from .harness import PipelineConfig, TrialResult, emit_report, run_matrix, run_trial
from .metrics import MetricsReport, compute_metrics
from .rng import SeededRng
from .store import (EmbeddingStore, PairRecord, SplitAssignment, load_store, save_store,
                    split, synth_generate)
from .tensor import Tensor, backward, dropout, leaky_relu, linear, softmax_cross_entropy

__all__ = [
    "ClusterModel", "kmeans_fit", "objective",
    "MODEL_MATRIX", "FusionSpec", "MlpConfig", "fuse", "predict", "train_classifier",
    "GcnConfig", "extract_edge_embeddings", "gcn2conv", "model_forward", "train_gcn",
    "ItrcGraph", "LineGraph", "build_itrc_graph", "label_edges", "normalized_adjacency",
    "reduce_edges", "to_line_graph",
    "PipelineConfig", "TrialResult", "emit_report", "run_matrix", "run_trial",
    "MetricsReport", "compute_metrics",
    "SeededRng",
    "EmbeddingStore", "PairRecord", "SplitAssignment", "load_store", "save_store",
    "split", "synth_generate",
    "Tensor", "backward", "dropout", "leaky_relu", "linear", "softmax_cross_entropy",
    "__version__",
]
