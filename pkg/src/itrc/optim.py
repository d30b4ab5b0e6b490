"""Adam optimizer with bias correction and the linear LR decay schedule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter first/second moment buffers plus the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[Tensor], beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params],
                   beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray],
              state: AdamState, lr: float) -> None:
    """One in-place Adam update; increments ``state.step``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError(f"adam_step: got {len(params)} params, {len(grads)} grads, "
                         f"{len(state.m)} state slots")
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ValueError(f"adam_step: grad shape {g.shape} does not match "
                             f"parameter {p.name or i} shape {p.data.shape}")
        if not np.isfinite(g).all():
            raise ValueError(f"adam_step: non-finite gradient for parameter {p.name or i}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def lr_decay_factor(epoch: int, total_epochs: int) -> float:
    """Linear decay ``1 - epoch/total_epochs``, in (0, 1]."""
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"lr_decay_factor: epoch {epoch} outside [0, {total_epochs})")
    return 1.0 - epoch / total_epochs
