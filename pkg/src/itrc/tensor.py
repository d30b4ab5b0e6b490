"""Dense float64 tensors with reverse-mode automatic differentiation.

Small, numpy-backed engine covering exactly what GCN and MLP training
needs: matmul/linear, elementwise add and scaling, leaky ReLU, inverted
dropout, and a fused softmax cross-entropy. Gradients flow through a
closure-per-op graph and are accumulated by :func:`backward`.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from .rng import SeededRng


class ShapeError(ValueError):
    """Operand shapes do not line up."""


class Tensor:
    """A row-major float64 array, optionally tracked by autodiff.

    ``requires_grad`` marks trainable leaves; tensors produced by ops
    inherit it from their parents. ``grad`` is populated on leaves by
    :func:`backward` and has the same shape as ``data``.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.asarray(data, dtype=np.float64)
        # ascontiguousarray would promote 0-d scalars to 1-d
        self.data = arr if arr.flags["C_CONTIGUOUS"] else np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Optional[Callable[[np.ndarray], Sequence[np.ndarray]]] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def is_leaf(self) -> bool:
        return not self._parents

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"


def _from_op(data: np.ndarray, parents: Sequence[Tensor],
             backward_fn: Callable[[np.ndarray], Sequence[np.ndarray]]) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def linear(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """Affine map ``x @ w (+ b)`` with gradients to all operands."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ShapeError(f"linear: cannot multiply X{x.data.shape} by W{w.data.shape}")
    y = x.data @ w.data
    if b is not None:
        if b.data.shape != (w.data.shape[1],):
            raise ShapeError(f"linear: bias shape {b.data.shape} does not match output width {w.data.shape[1]}")
        y = y + b.data

    def backward_fn(g: np.ndarray):
        grads = [g @ w.data.T, x.data.T @ g]
        if b is not None:
            grads.append(g.sum(axis=0))
        return grads

    parents = (x, w) if b is None else (x, w, b)
    return _from_op(y, parents, backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return linear(a, b)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add: shapes {a.data.shape} and {b.data.shape} differ")
    return _from_op(a.data + b.data, (a, b), lambda g: [g, g])


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _from_op(a.data * s, (a,), lambda g: [g * s])


def leaky_relu(x: Tensor, slope: float) -> Tensor:
    """Elementwise ``max(v, slope*v)``; ``slope=0`` is plain ReLU."""
    if not 0.0 <= slope < 1.0:
        raise ValueError(f"leaky_relu: slope must be in [0, 1), got {slope}")
    factor = np.where(x.data > 0, 1.0, slope)
    return _from_op(x.data * factor, (x,), lambda g: [g * factor])


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def dropout(x: Tensor, rate: float, rng: SeededRng, training: bool) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale survivors.

    Identity (the input tensor itself) when not training or rate is 0.
    """
    if rate >= 1.0 or rate < 0.0:
        raise ValueError(f"dropout: rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return _from_op(x.data * keep, (x,), lambda g: [g * keep])


def tensor_sum(x: Tensor) -> Tensor:
    return _from_op(np.asarray(x.data.sum()), (x,),
                    lambda g: [np.broadcast_to(g, x.data.shape).copy()])


def softmax(logits: Tensor) -> np.ndarray:
    """Row-stabilized softmax, inference only (no graph)."""
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray,
                          mask: Optional[np.ndarray] = None) -> tuple[Tensor, Tensor]:
    """Mean negative log-likelihood over masked rows, plus row probabilities.

    Stabilized by row-max subtraction; the returned probability tensor is
    detached (gradient flows only through the loss).
    """
    if logits.data.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: logits must be 2-d, got {logits.data.shape}")
    n, c = logits.data.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ShapeError(f"softmax_cross_entropy: labels shape {labels.shape} does not match {n} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"softmax_cross_entropy: labels must lie in [0, {c})")
    if mask is None:
        mask = np.ones(n, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (n,):
            raise ShapeError(f"softmax_cross_entropy: mask shape {mask.shape} does not match {n} rows")
    n_masked = int(mask.sum())
    if n_masked == 0:
        raise ValueError("softmax_cross_entropy: no supervised rows (empty mask)")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    probs = exp / denom
    log_probs = shifted - np.log(denom)
    loss_val = -log_probs[mask, labels[mask]].mean()

    def backward_fn(g: np.ndarray):
        d = probs.copy()
        d[np.arange(n), labels] -= 1.0
        d[~mask] = 0.0
        return [d * (float(g) / n_masked)]

    loss = _from_op(np.asarray(loss_val), (logits,), backward_fn)
    return loss, Tensor(probs)


def _topo_order(root: Tensor) -> list[Tensor]:
    # Iterative post-order; training graphs get hundreds of nodes deep.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable ``requires_grad`` leaf.

    Refuses non-scalar roots and repeated calls whose leaves still hold
    gradients: zero them (``zero_grad``) between steps.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    order = _topo_order(loss)
    for node in order:
        if node.requires_grad and node.is_leaf() and node.grad is not None:
            raise RuntimeError(
                f"backward: gradient already populated on {node.name or 'a leaf'}; "
                "zero gradients before calling backward again")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad and node.is_leaf():
            node.grad = g
        if node._backward_fn is not None:
            for parent, pg in zip(node._parents, node._backward_fn(g)):
                if not parent.requires_grad:
                    continue
                acc = grads.get(id(parent))
                grads[id(parent)] = pg if acc is None else acc + pg


def zero_grad(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = None


def glorot_uniform(fan_in: int, fan_out: int, rng: SeededRng,
                   name: Optional[str] = None) -> Tensor:
    """Weight matrix drawn uniformly in +/- sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, (fan_in, fan_out)), requires_grad=True, name=name)


def zeros_param(width: int, name: Optional[str] = None) -> Tensor:
    return Tensor(np.zeros(width), requires_grad=True, name=name)
