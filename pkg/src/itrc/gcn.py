"""Deep GCN over the line graph: initial-residual + identity-mapping convolutions.

Each layer computes ((1-a) P H + a H0) ((1-b_l) I + b_l W_l) with
b_l = ln(lambda/l + 1), followed outside by LeakyReLU and dropout. The
head maps to a 512-wide intermediate (whose activations become per-pair
edge embeddings) and then to class logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import LineGraph, normalized_adjacency
from .optim import AdamState, adam_step, lr_decay_factor
from .rng import SeededRng
from .store import EmbeddingStore
from .tensor import (Tensor, add, backward, dropout, glorot_uniform, leaky_relu, linear,
                     matmul, scale, softmax, softmax_cross_entropy, zero_grad, zeros_param)


@dataclass
class GcnConfig:
    layers: int = 64
    alpha: float = 0.1
    lam: float = 0.5
    dropout: float = 0.5
    leaky_slope: float = 0.01
    hidden_dim: int = 512          # width of the extracted intermediate embedding
    channels: Optional[int] = None  # input projection width; None = raw feature width
    n_classes: int = 2
    epochs: int = 100
    lr: float = 0.005


@dataclass
class GcnModel:
    config: GcnConfig
    proj: Optional[Tensor]         # (in_dim, channels) when configured
    conv_weights: list[Tensor]     # (channels, channels) each
    fc1_w: Tensor                  # (channels, hidden_dim)
    fc1_b: Tensor
    fc2_w: Tensor                  # (hidden_dim, n_classes)
    fc2_b: Tensor

    def parameters(self) -> list[Tensor]:
        params = [] if self.proj is None else [self.proj]
        return params + self.conv_weights + [self.fc1_w, self.fc1_b, self.fc2_w, self.fc2_b]


def beta_for_layer(lam: float, layer: int) -> float:
    """Identity-mapping strength ln(lambda/l + 1) for 1-indexed layer l."""
    if layer < 1:
        raise ValueError(f"beta_for_layer: layer index must be >= 1, got {layer}")
    return math.log(lam / layer + 1.0)


def init_gcn_model(in_dim: int, cfg: GcnConfig, rng: SeededRng) -> GcnModel:
    if cfg.layers < 1:
        raise ValueError(f"gcn: layer count must be >= 1, got {cfg.layers}")
    r = rng.child("gcn-init")
    channels = cfg.channels if cfg.channels is not None else in_dim
    proj = None
    if channels != in_dim:
        proj = glorot_uniform(in_dim, channels, r, name="gcn.proj")
    convs = [glorot_uniform(channels, channels, r, name=f"gcn.conv{l}")
             for l in range(1, cfg.layers + 1)]
    return GcnModel(
        config=cfg,
        proj=proj,
        conv_weights=convs,
        fc1_w=glorot_uniform(channels, cfg.hidden_dim, r, name="gcn.fc1.w"),
        fc1_b=zeros_param(cfg.hidden_dim, name="gcn.fc1.b"),
        fc2_w=glorot_uniform(cfg.hidden_dim, cfg.n_classes, r, name="gcn.fc2.w"),
        fc2_b=zeros_param(cfg.n_classes, name="gcn.fc2.b"),
    )


def gcn2conv(h: Tensor, h0: Tensor, p_norm: Tensor, w: Tensor,
             alpha: float, beta: float) -> Tensor:
    """One propagation step; activation is applied by the caller."""
    support = add(scale(matmul(p_norm, h), 1.0 - alpha), scale(h0, alpha))
    return add(scale(support, 1.0 - beta), scale(matmul(support, w), beta))


def _forward_logits(f_in: Tensor, p_norm: Tensor, model: GcnModel, training: bool,
                    rng: Optional[SeededRng]) -> tuple[Tensor, Tensor]:
    cfg = model.config
    h0 = f_in if model.proj is None else matmul(f_in, model.proj)
    h = h0
    for l, w in enumerate(model.conv_weights, start=1):
        h = gcn2conv(h, h0, p_norm, w, cfg.alpha, beta_for_layer(cfg.lam, l))
        h = leaky_relu(h, cfg.leaky_slope)
        h = dropout(h, cfg.dropout, rng, training)
    f_out = leaky_relu(linear(h, model.fc1_w, model.fc1_b), cfg.leaky_slope)
    hd = dropout(f_out, cfg.dropout, rng, training)
    logits = linear(hd, model.fc2_w, model.fc2_b)
    return f_out, logits


def model_forward(f_in: Tensor, p_norm: Tensor, model: GcnModel, training: bool = False,
                  rng: Optional[SeededRng] = None) -> tuple[Tensor, Tensor]:
    """Full pipeline; returns the 512-wide intermediate and softmax rows."""
    if training and rng is None:
        raise ValueError("model_forward: training mode needs an rng for dropout")
    f_out, logits = _forward_logits(f_in, p_norm, model, training, rng)
    return f_out, Tensor(softmax(logits))


@dataclass
class GcnTrainResult:
    model: GcnModel
    train_losses: list[float] = field(default_factory=list)


def train_gcn(lg: LineGraph, cfg: GcnConfig, seed: int) -> GcnTrainResult:
    """Full-graph supervised training on train-masked line-graph nodes."""
    if lg.num_nodes == 0:
        raise ValueError("train_gcn: empty line graph")
    if not lg.train_mask.any():
        raise ValueError("train_gcn: no train-masked nodes")
    rng = SeededRng(seed)
    model = init_gcn_model(lg.features.shape[1], cfg, rng)
    drop_rng = rng.child("gcn-dropout")
    f_in = Tensor(lg.features)
    p_norm = Tensor(normalized_adjacency(lg))
    params = model.parameters()
    state = AdamState.for_params(params)
    losses = []
    for epoch in range(cfg.epochs):
        _, logits = _forward_logits(f_in, p_norm, model, True, drop_rng)
        loss, _ = softmax_cross_entropy(logits, lg.labels, lg.train_mask)
        backward(loss)
        adam_step(params, [p.grad for p in params], state,
                  cfg.lr * lr_decay_factor(epoch, cfg.epochs))
        zero_grad(params)
        losses.append(float(loss.data))
    return GcnTrainResult(model=model, train_losses=losses)


def node_predictions(model: GcnModel, lg: LineGraph) -> np.ndarray:
    """Eval-mode argmax class per line-graph node."""
    f_in = Tensor(lg.features)
    p_norm = Tensor(normalized_adjacency(lg))
    _, z = model_forward(f_in, p_norm, model, training=False)
    return np.argmax(z.data, axis=1)


def extract_edge_embeddings(model: GcnModel, lg: LineGraph,
                            store: EmbeddingStore) -> np.ndarray:
    """Per-pair edge vectors: the intermediate embedding of the pair's node."""
    f_in = Tensor(lg.features)
    p_norm = Tensor(normalized_adjacency(lg))
    f_out, _ = model_forward(f_in, p_norm, model, training=False)
    rows = []
    for pid in store.pair_ids:
        if pid not in lg.pair_map:
            raise ValueError(f"extract_edge_embeddings: pair {pid!r} missing from pair_map")
        rows.append(lg.pair_map[pid])
    return f_out.data[np.array(rows, dtype=np.int64)]
