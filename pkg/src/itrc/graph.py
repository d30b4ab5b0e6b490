"""Cluster relation graph, its line graph, edge labeling and reduction.

The relation graph has one node per non-empty text/image cluster and one
edge per distinct (text cluster, image cluster) combination touched by at
least one pair; the line graph swaps those roles so edges become nodes
that a GCN can classify. Reduction prunes same-label train-train links
and adds J-nearest-neighbor links by Euclidean feature distance.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .clustering import ClusterModel
from .rng import SeededRng
from .store import LABELS, EmbeddingStore, SplitAssignment

TRAIN_TAGS = ("train", "val")   # validation pairs count as training for graph labels


@dataclass
class ItrcNode:
    node_id: int
    modality: str
    cluster: int
    mean_embedding: np.ndarray   # (dim,)
    members: list[str]           # pair ids


@dataclass
class ItrcEdge:
    edge_id: int
    text_node: int
    image_node: int
    feature: np.ndarray          # (2*dim,) concat of endpoint means
    members: list[str]
    label: Optional[str] = None
    label_source: Optional[str] = None   # train_majority | tie_random | test_majority
    train: bool = False                  # any member tagged train/val


@dataclass
class ItrcGraph:
    nodes: list[ItrcNode]
    edges: list[ItrcEdge]

    def node_by_id(self, node_id: int) -> ItrcNode:
        return self.nodes[node_id]


@dataclass
class LineGraph:
    """Nodes are relation-graph edges; links join edges sharing an endpoint."""

    features: np.ndarray                 # (L, 2*dim)
    labels: np.ndarray                   # (L,) class indices
    label_sources: list[str]
    train_mask: np.ndarray               # (L,) bool
    edges: list[tuple[int, int]]         # undirected, u < v, deduplicated
    pair_map: dict[str, int]             # pair id -> node index
    stats: dict = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]


def build_itrc_graph(store: EmbeddingStore, text_clusters: ClusterModel,
                     image_clusters: ClusterModel) -> ItrcGraph:
    """Steps 2-3: pseudo-nodes from clusters, deduplicated cluster-pair edges."""
    n = store.n
    for tag, model in (("text", text_clusters), ("image", image_clusters)):
        if model.assignments.shape[0] != n:
            raise ValueError(f"{tag} clustering covers {model.assignments.shape[0]} pairs, store has {n}")
        if model.assignments.min() < 0 or model.assignments.max() >= model.k:
            raise ValueError(f"{tag} clustering references a missing cluster "
                             f"(k={model.k}, saw {int(model.assignments.max())})")

    nodes: list[ItrcNode] = []
    node_of: dict[tuple[str, int], int] = {}
    for modality, model, matrix in (("text", text_clusters, store.text_matrix),
                                    ("image", image_clusters, store.image_matrix)):
        for c in range(model.k):
            member_idx = np.where(model.assignments == c)[0]
            if member_idx.size == 0:
                continue    # empty clusters are dropped
            node = ItrcNode(
                node_id=len(nodes),
                modality=modality,
                cluster=c,
                mean_embedding=matrix[member_idx].mean(axis=0),
                members=[store.records[i].pair_id for i in member_idx],
            )
            node_of[(modality, c)] = node.node_id
            nodes.append(node)

    groups: dict[tuple[int, int], list[int]] = {}
    for i in range(n):
        tc = int(text_clusters.assignments[i])
        ic = int(image_clusters.assignments[i])
        groups.setdefault((tc, ic), []).append(i)

    edges: list[ItrcEdge] = []
    for (tc, ic) in sorted(groups):
        t_node = node_of[("text", tc)]
        i_node = node_of[("image", ic)]
        edges.append(ItrcEdge(
            edge_id=len(edges),
            text_node=t_node,
            image_node=i_node,
            feature=np.concatenate([nodes[t_node].mean_embedding,
                                    nodes[i_node].mean_embedding]),
            members=[store.records[i].pair_id for i in groups[(tc, ic)]],
        ))
    return ItrcGraph(nodes=nodes, edges=edges)


def _majority(votes: list[str], rng: SeededRng) -> tuple[str, bool]:
    counts = {lab: 0 for lab in LABELS}
    for v in votes:
        counts[v] += 1
    best = max(counts.values())
    winners = [lab for lab in LABELS if counts[lab] == best]
    if len(winners) == 1:
        return winners[0], False
    return winners[rng.choice(len(winners))], True


def label_edges(graph: ItrcGraph, store: EmbeddingStore, split: SplitAssignment,
                seed: int) -> ItrcGraph:
    """Step 4 labeling: majority vote, train/val members outrank test members.

    Edges with any train/val member vote over those members only and are
    train-masked; all-test edges vote among themselves. Ties are broken by
    a seeded draw.
    """
    label_of = {r.pair_id: r.label for r in store.records}
    tag_of = {r.pair_id: split.tags[i] for i, r in enumerate(store.records)}
    rng = SeededRng(seed).child("edge-labels")
    for edge in graph.edges:
        missing = [m for m in edge.members if m not in tag_of]
        if missing:
            raise ValueError(f"edge {edge.edge_id} member {missing[0]!r} has no split tag")
        train_votes = [label_of[m] for m in edge.members if tag_of[m] in TRAIN_TAGS]
        if train_votes:
            label, tied = _majority(train_votes, rng)
            edge.label_source = "tie_random" if tied else "train_majority"
            edge.train = True
        else:
            label, tied = _majority([label_of[m] for m in edge.members], rng)
            edge.label_source = "tie_random" if tied else "test_majority"
            edge.train = False
        edge.label = label
    return graph


def to_line_graph(graph: ItrcGraph) -> LineGraph:
    """Swap nodes and edges: line-graph nodes adjacent iff edges shared an endpoint."""
    L = len(graph.edges)
    if any(e.label is None for e in graph.edges):
        raise ValueError("to_line_graph: run label_edges first")
    features = np.stack([e.feature for e in graph.edges]) if L else np.zeros((0, 0))
    labels = np.array([LABELS.index(e.label) for e in graph.edges], dtype=np.int64)
    by_endpoint: dict[int, list[int]] = {}
    for e in graph.edges:
        by_endpoint.setdefault(e.text_node, []).append(e.edge_id)
        by_endpoint.setdefault(e.image_node, []).append(e.edge_id)
    links: set[tuple[int, int]] = set()
    for incident in by_endpoint.values():
        for a in range(len(incident)):
            for b in range(a + 1, len(incident)):
                u, v = incident[a], incident[b]
                links.add((u, v) if u < v else (v, u))
    pair_map: dict[str, int] = {}
    for e in graph.edges:
        for m in e.members:
            pair_map[m] = e.edge_id
    return LineGraph(
        features=features,
        labels=labels,
        label_sources=[e.label_source for e in graph.edges],
        train_mask=np.array([e.train for e in graph.edges], dtype=bool),
        edges=sorted(links),
        pair_map=pair_map,
        stats={"num_nodes": L, "edges_initial": len(links)},
    )


def _knn_links(features: np.ndarray, j: int) -> set[tuple[int, int]]:
    """Symmetric union of each node's j nearest neighbors (Euclidean).

    Equal distances resolve to the lower node index (stable sort).
    """
    if j == 0:
        return set()
    sq = np.sum(features ** 2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (features @ features.T), 0.0)
    np.fill_diagonal(d2, np.inf)
    links: set[tuple[int, int]] = set()
    for u in range(features.shape[0]):
        nearest = np.argsort(d2[u], kind="stable")[:j]
        for v in nearest:
            v = int(v)
            links.add((u, v) if u < v else (v, u))
    return links


def reduce_edges(lg: LineGraph, j: int, remove_same_label_train: bool = True,
                 add_knn: bool = True, order: str = "remove-then-add") -> LineGraph:
    """Edge reduction: drop same-label train-train links, connect J nearest.

    Nodes, features, labels, masks, and pair_map are untouched; only the
    adjacency changes. Both steps can be toggled, and their composition
    order is configurable (default removes first, then adds).
    """
    L = lg.num_nodes
    if j >= L:
        raise ValueError(f"reduce_edges: j={j} must be smaller than the {L} nodes")
    if order not in ("remove-then-add", "add-then-remove"):
        raise ValueError(f"reduce_edges: unknown order {order!r}")

    def removable(u: int, v: int) -> bool:
        return (bool(lg.train_mask[u]) and bool(lg.train_mask[v])
                and lg.labels[u] == lg.labels[v])

    before = set(lg.edges)
    knn = _knn_links(lg.features, j) if add_knn else set()
    if order == "remove-then-add":
        kept = {e for e in before if not (remove_same_label_train and removable(*e))}
        result = kept | knn
        removed = len(before) - len(kept)
        added = len(result) - len(kept)
    else:
        merged = before | knn
        added = len(merged) - len(before)
        result = {e for e in merged if not (remove_same_label_train and removable(*e))}
        removed = len(merged) - len(result)

    stats = dict(lg.stats)
    stats.update({
        "edges_before_reduction": len(before),
        "edges_removed_same_label": removed,
        "edges_added_knn": added,
        "edges_after_reduction": len(result),
        "j": j,
        "reduction_order": order,
    })
    return LineGraph(features=lg.features, labels=lg.labels,
                     label_sources=list(lg.label_sources),
                     train_mask=lg.train_mask.copy(), edges=sorted(result),
                     pair_map=dict(lg.pair_map), stats=stats)


def node_count_stats(lg: LineGraph) -> dict:
    """Train/test node counts, test side broken down by class."""
    test = ~lg.train_mask
    return {
        "train_nodes": int(lg.train_mask.sum()),
        "test_nodes": int(test.sum()),
        "test_similar_nodes": int((test & (lg.labels == 0)).sum()),
        "test_complementary_nodes": int((test & (lg.labels == 1)).sum()),
    }


def normalized_adjacency(lg: LineGraph) -> np.ndarray:
    """Symmetric propagation operator D^{-1/2} (A + I) D^{-1/2}."""
    L = lg.num_nodes
    a = np.zeros((L, L))
    for u, v in lg.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    a += np.eye(L)
    d_inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def _encode_f64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode()


def _decode_f64(blob: str, shape: tuple[int, ...]) -> np.ndarray:
    return np.frombuffer(base64.b64decode(blob), dtype="<f8").reshape(shape).copy()


def graph_to_json(graph: ItrcGraph, lg: LineGraph) -> dict:
    """Serializable bundle of the labeled graph and its reduced line graph."""
    dim = graph.nodes[0].mean_embedding.shape[0] if graph.nodes else 0
    return {
        "format": "itrc-graph",
        "version": 1,
        "dim": dim,
        "nodes": [{
            "id": nd.node_id, "modality": nd.modality, "cluster": nd.cluster,
            "mean": _encode_f64(nd.mean_embedding), "members": nd.members,
        } for nd in graph.nodes],
        "edges": [{
            "id": e.edge_id, "text_node": e.text_node, "image_node": e.image_node,
            "members": e.members, "label": e.label, "label_source": e.label_source,
            "train": e.train,
        } for e in graph.edges],
        "line_graph": {
            "edges": [list(e) for e in lg.edges],
            "train_mask": [bool(t) for t in lg.train_mask],
            "labels": [LABELS[i] for i in lg.labels],
            "label_sources": lg.label_sources,
            "pair_map": lg.pair_map,
        },
        "stats": lg.stats,
    }


def graph_from_json(doc: dict) -> tuple[ItrcGraph, LineGraph]:
    if doc.get("format") != "itrc-graph":
        raise ValueError(f"not a graph document: format={doc.get('format')!r}")
    dim = int(doc["dim"])
    nodes = [ItrcNode(node_id=nd["id"], modality=nd["modality"], cluster=nd["cluster"],
                      mean_embedding=_decode_f64(nd["mean"], (dim,)), members=list(nd["members"]))
             for nd in doc["nodes"]]
    edges = []
    for ed in doc["edges"]:
        edges.append(ItrcEdge(
            edge_id=ed["id"], text_node=ed["text_node"], image_node=ed["image_node"],
            feature=np.concatenate([nodes[ed["text_node"]].mean_embedding,
                                    nodes[ed["image_node"]].mean_embedding]),
            members=list(ed["members"]), label=ed["label"],
            label_source=ed["label_source"], train=bool(ed["train"])))
    graph = ItrcGraph(nodes=nodes, edges=edges)
    lgdoc = doc["line_graph"]
    lg = LineGraph(
        features=np.stack([e.feature for e in edges]) if edges else np.zeros((0, 0)),
        labels=np.array([LABELS.index(lab) for lab in lgdoc["labels"]], dtype=np.int64),
        label_sources=list(lgdoc["label_sources"]),
        train_mask=np.array(lgdoc["train_mask"], dtype=bool),
        edges=[tuple(e) for e in lgdoc["edges"]],
        pair_map={k: int(v) for k, v in lgdoc["pair_map"].items()},
        stats=dict(doc.get("stats", {})),
    )
    return graph, lg


def save_graph(graph: ItrcGraph, lg: LineGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_json(graph, lg)))


def load_graph(path) -> tuple[ItrcGraph, LineGraph]:
    return graph_from_json(json.loads(Path(path).read_text()))
