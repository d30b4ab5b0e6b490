"""FastAPI service wrapping the pipeline; all artifacts live on disk.

Stage endpoints (cluster, build-graph, train-gcn, train-clf) derive their
per-stage RNG streams from the request seed exactly like the in-memory
trial runner, so a staged pipeline with one seed value reproduces
``run_trial`` up to the float32 quantization of the edge blob.
"""

from __future__ import annotations

import base64
import json
from collections import Counter
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..clustering import ClusterModel, kmeans_fit
from ..fusion import MODEL_MATRIX, MlpClassifier, MlpConfig, fuse, predict, train_classifier
from ..gcn import GcnConfig, model_forward, node_predictions, train_gcn
from ..graph import (build_itrc_graph, label_edges, load_graph, node_count_stats,
                     normalized_adjacency, reduce_edges, save_graph, to_line_graph)
from ..harness import (PipelineConfig, StageError, _stage_seeds, emit_report, run_matrix)
from ..metrics import compute_metrics
from ..store import LABELS, EmbeddingStore, StoreError, load_store, save_store, split, synth_generate
from ..tensor import Tensor
from . import schemas

app = FastAPI(title="itrc", version=__version__)


async def _client_error(request: Request, exc: Exception):
    stage = getattr(exc, "stage", request.url.path.strip("/"))
    return JSONResponse(status_code=400,
                        content={"detail": {"stage": str(stage), "message": str(exc)}})


for _etype in (StoreError, StageError, ValueError, FileNotFoundError, KeyError):
    app.add_exception_handler(_etype, _client_error)


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse()


@app.post("/ingest", response_model=schemas.IngestResponse)
def ingest(req: schemas.IngestRequest) -> schemas.IngestResponse:
    store = load_store(req.dir)
    counts = Counter(r.label for r in store.records)
    return schemas.IngestResponse(dir=req.dir, n=store.n, dim=store.dim,
                                  label_counts=dict(counts))


@app.post("/synth", response_model=schemas.SynthResponse)
def synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
    store = synth_generate(req.n, req.separation, req.seed)
    save_store(store, req.out)
    return schemas.SynthResponse(out=req.out, n=store.n, dim=store.dim)


def _encode_f64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode()


def _decode_f64(blob: str, shape) -> np.ndarray:
    return np.frombuffer(base64.b64decode(blob), dtype="<f8").reshape(shape).copy()


@app.post("/cluster", response_model=schemas.ClusterResponse)
def cluster(req: schemas.ClusterRequest) -> schemas.ClusterResponse:
    store = load_store(req.store)
    seeds = _stage_seeds(req.seed)
    doc = {"format": "itrc-clusters", "version": 1, "k": req.k, "seed": req.seed, "dim": store.dim}
    info = {}
    for modality, matrix in (("text", store.text_matrix), ("image", store.image_matrix)):
        model = kmeans_fit(matrix, req.k, seeds[f"kmeans-{modality}"], req.max_iter, modality)
        doc[modality] = {
            "assignments": model.assignments.tolist(),
            "centroids": _encode_f64(model.centroids),
            "objective": model.objective_history[-1],
            "iterations": model.n_iter,
        }
        info[modality] = schemas.ModalityClusterInfo(objective=model.objective_history[-1],
                                                     iterations=model.n_iter)
    Path(req.out).write_text(json.dumps(doc))
    return schemas.ClusterResponse(out=req.out, k=req.k, text=info["text"], image=info["image"])


def _load_clusters(path: str) -> tuple[int, dict[str, ClusterModel]]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "itrc-clusters":
        raise ValueError(f"{path}: not a clusters file")
    k, dim = int(doc["k"]), int(doc["dim"])
    models = {}
    for modality in ("text", "image"):
        sub = doc[modality]
        models[modality] = ClusterModel(
            k=k,
            centroids=_decode_f64(sub["centroids"], (k, dim)),
            assignments=np.array(sub["assignments"], dtype=np.int64),
            modality=modality,
        )
    return k, models


@app.post("/build-graph", response_model=schemas.BuildGraphResponse)
def build_graph(req: schemas.BuildGraphRequest) -> schemas.BuildGraphResponse:
    store = load_store(req.store)
    _, clusters = _load_clusters(req.clusters)
    seeds = _stage_seeds(req.seed)
    assignment = split(store.n, req.ratios, seeds["split"])
    graph = build_itrc_graph(store, clusters["text"], clusters["image"])
    label_edges(graph, store, assignment, seeds["labels"])
    lg = reduce_edges(to_line_graph(graph), req.j, req.remove_same_label,
                      req.add_knn, req.order)
    lg.stats.update(node_count_stats(lg))
    save_graph(graph, lg, req.out)
    return schemas.BuildGraphResponse(out=req.out, stats=dict(lg.stats))


@app.post("/train-gcn", response_model=schemas.TrainGcnResponse)
def train_gcn_endpoint(req: schemas.TrainGcnRequest) -> schemas.TrainGcnResponse:
    _, lg = load_graph(req.graph)
    cfg = GcnConfig(layers=req.layers, alpha=req.alpha, lam=req.lam, dropout=req.dropout,
                    leaky_slope=req.leaky_slope, channels=req.channels,
                    epochs=req.epochs, lr=req.lr)
    seeds = _stage_seeds(req.seed)
    result = train_gcn(lg, cfg, seeds["gcn"])

    # per-pair edge vectors; a sidecar records the id order of the rows
    order = sorted(lg.pair_map)
    rows = np.array([lg.pair_map[pid] for pid in order], dtype=np.int64)
    f_out, _ = model_forward(Tensor(lg.features), Tensor(normalized_adjacency(lg)), result.model)
    blob = np.ascontiguousarray(f_out.data[rows], dtype="<f4").tobytes()
    Path(req.out).write_bytes(blob)
    Path(req.out).with_suffix(".ids.json").write_text(json.dumps(order))

    node_metrics = None
    test_nodes = ~lg.train_mask
    if test_nodes.any():
        preds = node_predictions(result.model, lg)
        node_metrics = compute_metrics([LABELS[i] for i in preds[test_nodes]],
                                       [LABELS[i] for i in lg.labels[test_nodes]]).to_dict()
    if req.metrics_out:
        Path(req.metrics_out).write_text(json.dumps({
            "node_metrics": node_metrics,
            "final_loss": result.train_losses[-1],
            "epochs": len(result.train_losses),
        }, indent=1))
    return schemas.TrainGcnResponse(out=req.out, metrics_out=req.metrics_out,
                                    final_loss=result.train_losses[-1],
                                    node_metrics=node_metrics)


def _load_edge_vectors(path: str, store: EmbeddingStore) -> np.ndarray:
    raw = Path(path).read_bytes()
    ids_path = Path(path).with_suffix(".ids.json")
    if not ids_path.exists():
        raise FileNotFoundError(f"{ids_path}: edge blob sidecar with pair ids not found")
    order = json.loads(ids_path.read_text())
    if len(raw) % (4 * len(order)) != 0:
        raise ValueError(f"{path}: blob size {len(raw)} not divisible by {len(order)} rows")
    dim = len(raw) // (4 * len(order))
    mat = np.frombuffer(raw, dtype="<f4").reshape(len(order), dim).astype(np.float64)
    index = {pid: i for i, pid in enumerate(order)}
    try:
        rows = [index[r.pair_id] for r in store.records]
    except KeyError as exc:
        raise ValueError(f"{path}: store pair {exc} has no edge vector") from exc
    return mat[np.array(rows)]


def _mlp_to_json(model: MlpClassifier, name: str, extras: dict) -> dict:
    cfg = model.config
    return {
        "format": "itrc-mlp", "version": 1, "model": name,
        "input_dim": model.input_dim,
        "config": {"hidden1": cfg.hidden1, "hidden2": cfg.hidden2, "dropout": cfg.dropout,
                   "n_classes": cfg.n_classes},
        "params": {p.name.split(".")[-1]: _encode_f64(p.data) for p in model.parameters()},
        **extras,
    }


def mlp_from_json(doc: dict) -> MlpClassifier:
    if doc.get("format") != "itrc-mlp":
        raise ValueError("not an itrc-mlp document")
    c = doc["config"]
    cfg = MlpConfig(hidden1=c["hidden1"], hidden2=c["hidden2"], dropout=c["dropout"],
                    n_classes=c["n_classes"])
    d = int(doc["input_dim"])
    shapes = {"w1": (d, cfg.hidden1), "b1": (cfg.hidden1,),
              "w2": (cfg.hidden1, cfg.hidden2), "b2": (cfg.hidden2,),
              "w3": (cfg.hidden2, cfg.n_classes), "b3": (cfg.n_classes,)}
    tensors = {k: Tensor(_decode_f64(doc["params"][k], shape), requires_grad=True, name=f"mlp.{k}")
               for k, shape in shapes.items()}
    return MlpClassifier(config=cfg, input_dim=d, **tensors)


@app.post("/train-clf", response_model=schemas.TrainClfResponse)
def train_clf(req: schemas.TrainClfRequest) -> schemas.TrainClfResponse:
    if req.model not in MODEL_MATRIX:
        raise ValueError(f"unknown model {req.model!r}; expected one of {sorted(MODEL_MATRIX)}")
    spec = MODEL_MATRIX[req.model]
    store = load_store(req.store)
    v_edge = _load_edge_vectors(req.edges, store) if spec.use_edge else None
    fused = fuse(spec, v_text=store.text_matrix, v_image=store.image_matrix, v_edge=v_edge)
    seeds = _stage_seeds(req.seed)
    assignment = split(store.n, req.ratios, seeds["split"])
    y = store.label_indices()
    tr, va, te = assignment.train_indices, assignment.val_indices, assignment.test_indices
    cfg = MlpConfig(hidden1=req.hidden1, hidden2=req.hidden2, dropout=req.mlp_dropout,
                    epochs=req.mlp_epochs, batch_size=req.batch_size, lr=req.mlp_lr,
                    patience=req.patience)
    result = train_classifier(fused[tr], y[tr], fused[va], y[va], cfg, seeds["mlp"])
    preds, _ = predict(result.model, fused[te])
    test_metrics = compute_metrics([LABELS[i] for i in preds],
                                   [store.records[i].label for i in te])
    doc = _mlp_to_json(result.model, req.model,
                       {"best_epoch": result.best_epoch, "val_loss": result.best_val_loss,
                        "test_metrics": test_metrics.to_dict()})
    Path(req.out).write_text(json.dumps(doc))
    return schemas.TrainClfResponse(out=req.out, model=req.model,
                                    best_epoch=result.best_epoch,
                                    val_loss=result.best_val_loss,
                                    test_metrics=test_metrics.to_dict())


@app.post("/experiment", response_model=schemas.ExperimentResponse)
def experiment(req: schemas.ExperimentRequest) -> schemas.ExperimentResponse:
    store = load_store(req.store)
    names = list(MODEL_MATRIX) if req.models == ["all"] else req.models
    for name in names:
        if name not in MODEL_MATRIX:
            raise ValueError(f"unknown model {name!r}; expected one of {sorted(MODEL_MATRIX)}")
    cfg = PipelineConfig(
        ratios=req.ratios, k=req.k, kmeans_max_iter=req.kmeans_max_iter, j=req.j,
        remove_same_label=req.remove_same_label, add_knn=req.add_knn,
        reduction_order=req.order,
        gcn=GcnConfig(layers=req.layers, alpha=req.alpha, lam=req.lam, dropout=req.dropout,
                      leaky_slope=req.leaky_slope, channels=req.channels,
                      epochs=req.epochs, lr=req.lr),
        mlp=MlpConfig(hidden1=req.hidden1, hidden2=req.hidden2, dropout=req.mlp_dropout,
                      epochs=req.mlp_epochs, batch_size=req.batch_size, lr=req.mlp_lr,
                      patience=req.patience),
    )
    summaries = run_matrix(store, names, req.trials, req.seed, cfg)
    emit_report(summaries, req.report, req.format)
    rows = [schemas.ModelRow(model=s.model_name, means=s.means, variances=s.variances)
            for s in summaries]
    return schemas.ExperimentResponse(report=req.report, format=req.format, rows=rows)
