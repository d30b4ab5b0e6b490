"""Seeded spherical K-means: cosine similarity via L2-normalized rows.

Lloyd iterations on the unit sphere with k-means++ seeding, assignment by
maximum cosine, centroids as renormalized member means, and farthest-point
reseeding for empty clusters. The per-iteration objective history is kept
on the model so monotonicity is checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import SeededRng


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray          # (k, dim), unit rows
    assignments: np.ndarray        # (n,) cluster index
    modality: str = "text"
    objective_history: list[float] = field(default_factory=list)
    n_iter: int = 0


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    zero = np.where(norms == 0)[0]
    if zero.size:
        raise ValueError(f"kmeans: row {int(zero[0])} has zero norm")
    return x / norms[:, None]


def _plusplus_init(xn: np.ndarray, k: int, rng: SeededRng) -> np.ndarray:
    """k-means++ on the unit sphere (squared Euclidean = 2 - 2 cos)."""
    n = xn.shape[0]
    centers = np.empty((k, xn.shape[1]))
    centers[0] = xn[rng.integers(0, n)]
    d2 = np.maximum(2.0 - 2.0 * (xn @ centers[0]), 0.0)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(0, n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers[j] = xn[idx]
        d2 = np.minimum(d2, np.maximum(2.0 - 2.0 * (xn @ centers[j]), 0.0))
    return centers


def _assign(xn: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return np.argmax(xn @ centers.T, axis=1)


def _repair_empty(xn: np.ndarray, centers: np.ndarray, assign: np.ndarray) -> None:
    """Reseed each empty cluster from the point farthest from its centroid.

    Points that are the sole member of their cluster are never stolen, so
    the loop strictly shrinks the empty set.
    """
    k = centers.shape[0]
    while True:
        counts = np.bincount(assign, minlength=k)
        empties = np.where(counts == 0)[0]
        if empties.size == 0:
            return
        dist = 1.0 - np.einsum("ij,ij->i", xn, centers[assign])
        stealable = counts[assign] > 1
        dist = np.where(stealable, dist, -np.inf)
        far = int(np.argmax(dist))
        centers[empties[0]] = xn[far]
        assign[far] = empties[0]


def _update_centroids(xn: np.ndarray, assign: np.ndarray, centers: np.ndarray) -> np.ndarray:
    out = centers.copy()
    for j in range(centers.shape[0]):
        members = xn[assign == j]
        if members.shape[0] == 0:
            continue
        s = members.sum(axis=0)
        norm = np.linalg.norm(s)
        if norm > 0:
            out[j] = s / norm
    return out


def _objective_normalized(xn: np.ndarray, centers: np.ndarray, assign: np.ndarray) -> float:
    return float(np.sum(1.0 - np.einsum("ij,ij->i", xn, centers[assign])))


def kmeans_fit(x: np.ndarray, k: int, seed: int, max_iter: int = 100,
               modality: str = "text") -> ClusterModel:
    """Fit spherical K-means; stops at an assignment fixpoint or max_iter."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k > n:
        raise ValueError(f"kmeans: k={k} exceeds {n} rows")
    if k < 1:
        raise ValueError(f"kmeans: k must be >= 1, got {k}")
    xn = _normalize_rows(x)
    rng = SeededRng(seed).child(f"kmeans-{modality}")

    centers = _plusplus_init(xn, k, rng)
    assign = _assign(xn, centers)
    _repair_empty(xn, centers, assign)
    history = [_objective_normalized(xn, centers, assign)]
    n_iter = 0
    for _ in range(max_iter):
        n_iter += 1
        centers = _update_centroids(xn, assign, centers)
        new_assign = _assign(xn, centers)
        _repair_empty(xn, centers, new_assign)
        history.append(_objective_normalized(xn, centers, new_assign))
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
    return ClusterModel(k=k, centroids=centers, assignments=assign, modality=modality,
                        objective_history=history, n_iter=n_iter)


def objective(x: np.ndarray, model: ClusterModel) -> float:
    """Sum of (1 - cosine) between rows and their assigned centroids."""
    xn = _normalize_rows(np.asarray(x, dtype=np.float64))
    if xn.shape[1] != model.centroids.shape[1]:
        raise ValueError(f"objective: dim {xn.shape[1]} does not match "
                         f"model dim {model.centroids.shape[1]}")
    return _objective_normalized(xn, model.centroids, model.assignments)
