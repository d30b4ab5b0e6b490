"""Vector fusion per the nine-model matrix and the three-layer MLP classifier."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .optim import AdamState, adam_step, lr_decay_factor
from .rng import SeededRng
from .tensor import (Tensor, backward, dropout, glorot_uniform, linear, relu, softmax,
                     softmax_cross_entropy, zero_grad, zeros_param)

AVERAGE = "average"
CONCAT = "concat"
AVERAGE_CONCAT = "average_concat"


@dataclass(frozen=True)
class FusionSpec:
    """Which of the text/image/edge vectors to fuse, and how."""

    use_text: bool
    use_image: bool
    use_edge: bool
    method: str

    def __post_init__(self):
        if self.method not in (AVERAGE, CONCAT, AVERAGE_CONCAT):
            raise ValueError(f"unknown fusion method {self.method!r}")
        if sum((self.use_text, self.use_image, self.use_edge)) < 2:
            raise ValueError("fusion needs at least two of text/image/edge")
        if self.method == AVERAGE_CONCAT and not (self.use_text and self.use_image and self.use_edge):
            raise ValueError("average+concat fusion requires all three vectors")

    @property
    def n_selected(self) -> int:
        return sum((self.use_text, self.use_image, self.use_edge))

    def fused_dim(self, dim: int = 512) -> int:
        if self.method == AVERAGE:
            return dim
        if self.method == CONCAT:
            return dim * self.n_selected
        return 2 * dim


# Table-style model matrix: T=text, I=image, E=edge; A=average, C=concatenation.
MODEL_MATRIX: dict[str, FusionSpec] = {
    "T+I(A)": FusionSpec(True, True, False, AVERAGE),
    "T+I(C)": FusionSpec(True, True, False, CONCAT),
    "T+E(A)": FusionSpec(True, False, True, AVERAGE),
    "T+E(C)": FusionSpec(True, False, True, CONCAT),
    "I+E(A)": FusionSpec(False, True, True, AVERAGE),
    "I+E(C)": FusionSpec(False, True, True, CONCAT),
    "T+I+E(A)": FusionSpec(True, True, True, AVERAGE),
    "T+I+E(C)": FusionSpec(True, True, True, CONCAT),
    "T+I+E(A+C)": FusionSpec(True, True, True, AVERAGE_CONCAT),
}
BASELINE_MODELS = ("T+I(A)", "T+I(C)")


def fuse(spec: FusionSpec, v_text: Optional[np.ndarray] = None,
         v_image: Optional[np.ndarray] = None,
         v_edge: Optional[np.ndarray] = None) -> np.ndarray:
    """Fuse selected vectors along the last axis; accepts single rows or batches."""
    chosen = []
    for use, v, name in ((spec.use_text, v_text, "text"), (spec.use_image, v_image, "image"),
                         (spec.use_edge, v_edge, "edge")):
        if not use:
            continue
        if v is None:
            raise ValueError(f"fusion selects the {name} vector but it was not provided")
        chosen.append(np.asarray(v, dtype=np.float64))
    width = chosen[0].shape[-1]
    for v in chosen[1:]:
        if v.shape != chosen[0].shape:
            raise ValueError(f"fused inputs disagree in shape: {v.shape} vs {chosen[0].shape}")
    if spec.method == AVERAGE:
        return np.mean(chosen, axis=0)
    if spec.method == CONCAT:
        return np.concatenate(chosen, axis=-1)
    avg_ti = 0.5 * (chosen[0] + chosen[1])
    return np.concatenate([avg_ti, chosen[2]], axis=-1)


@dataclass
class MlpConfig:
    hidden1: int = 256
    hidden2: int = 64
    dropout: float = 0.5
    n_classes: int = 2
    epochs: int = 100
    batch_size: int = 4
    lr: float = 0.001
    patience: int = 10

    def validate(self) -> None:
        if self.patience < 1:
            raise ValueError(f"mlp: patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ValueError(f"mlp: batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"mlp: epochs must be >= 1, got {self.epochs}")


@dataclass
class MlpClassifier:
    """Three affine layers with ReLU + dropout after the first two."""

    config: MlpConfig
    input_dim: int
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    w3: Tensor
    b3: Tensor

    def parameters(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]


def init_mlp(input_dim: int, cfg: MlpConfig, rng: SeededRng) -> MlpClassifier:
    r = rng.child("mlp-init")
    return MlpClassifier(
        config=cfg, input_dim=input_dim,
        w1=glorot_uniform(input_dim, cfg.hidden1, r, name="mlp.w1"),
        b1=zeros_param(cfg.hidden1, name="mlp.b1"),
        w2=glorot_uniform(cfg.hidden1, cfg.hidden2, r, name="mlp.w2"),
        b2=zeros_param(cfg.hidden2, name="mlp.b2"),
        w3=glorot_uniform(cfg.hidden2, cfg.n_classes, r, name="mlp.w3"),
        b3=zeros_param(cfg.n_classes, name="mlp.b3"),
    )


def _mlp_logits(model: MlpClassifier, x: Tensor, training: bool,
                rng: Optional[SeededRng]) -> Tensor:
    cfg = model.config
    h = dropout(relu(linear(x, model.w1, model.b1)), cfg.dropout, rng, training)
    h = dropout(relu(linear(h, model.w2, model.b2)), cfg.dropout, rng, training)
    return linear(h, model.w3, model.b3)


@dataclass
class MlpTrainResult:
    model: MlpClassifier
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")


def train_classifier(train_x: np.ndarray, train_y: np.ndarray, val_x: np.ndarray,
                     val_y: np.ndarray, cfg: MlpConfig, seed: int) -> MlpTrainResult:
    """Minibatch Adam with linear LR decay, early stopping on validation loss.

    Returns the checkpoint with the lowest validation loss observed.
    """
    cfg.validate()
    train_x = np.asarray(train_x, dtype=np.float64)
    val_x = np.asarray(val_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    val_y = np.asarray(val_y, dtype=np.int64)
    if train_x.shape[0] == 0 or val_x.shape[0] == 0:
        raise ValueError("train_classifier: train and validation sets must be non-empty")
    if train_x.shape[1] != val_x.shape[1]:
        raise ValueError(f"train_classifier: train width {train_x.shape[1]} != "
                         f"val width {val_x.shape[1]}")

    rng = SeededRng(seed)
    model = init_mlp(train_x.shape[1], cfg, rng)
    shuffle_rng = rng.child("mlp-shuffle")
    drop_rng = rng.child("mlp-dropout")
    params = model.parameters()
    state = AdamState.for_params(params)
    val_t = Tensor(val_x)

    result = MlpTrainResult(model=model)
    best_params: list[np.ndarray] = [p.data.copy() for p in params]
    bad_epochs = 0
    for epoch in range(cfg.epochs):
        lr = cfg.lr * lr_decay_factor(epoch, cfg.epochs)
        order = shuffle_rng.permutation(train_x.shape[0])
        epoch_loss = 0.0
        for start in range(0, order.size, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            logits = _mlp_logits(model, Tensor(train_x[idx]), True, drop_rng)
            loss, _ = softmax_cross_entropy(logits, train_y[idx])
            backward(loss)
            adam_step(params, [p.grad for p in params], state, lr)
            zero_grad(params)
            epoch_loss += float(loss.data) * idx.size
        result.train_losses.append(epoch_loss / order.size)

        val_logits = _mlp_logits(model, val_t, False, None)
        val_loss, _ = softmax_cross_entropy(val_logits, val_y)
        val_loss = float(val_loss.data)
        result.val_losses.append(val_loss)
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            best_params = [p.data.copy() for p in params]
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    for p, best in zip(params, best_params):
        p.data = best
    return result


def predict(model: MlpClassifier, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode labels and class probabilities; ties go to the lower class."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise ValueError(f"predict: input width {x.shape[1]} does not match "
                         f"model width {model.input_dim}")
    logits = _mlp_logits(model, Tensor(x), False, None)
    probs = softmax(logits)
    return np.argmax(probs, axis=1), probs
