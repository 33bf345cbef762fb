from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import networkx as nx
import numpy as np
import numpy.typing as npt
from scipy import sparse

from fdgnn.state.models import ContractError, Dataset, FloatArray, Graph, IntArray, TargetMatrix


@dataclass(frozen=True)
class DatasetSummary:
    name: str
    num_graphs: int
    total_vertices: int
    avg_vertices: float
    num_classes: int
    label_dim: int
    avg_max_degree: float
    global_max_degree: int


def symmetric_adjacency(num_vertices: int, rows: IntArray, cols: IntArray) -> sparse.csr_matrix:
    keep = rows != cols
    rows, cols = rows[keep], cols[keep]
    both_rows = np.concatenate([rows, cols])
    both_cols = np.concatenate([cols, rows])
    adjacency = sparse.csr_matrix(
        (np.ones(len(both_rows), dtype=np.float64), (both_rows, both_cols)),
        shape=(num_vertices, num_vertices),
    )
    # duplicates were summed by the conversion; adjacency is boolean
    adjacency.data[:] = 1.0
    adjacency.sort_indices()
    return adjacency


def graph_from_edges(
    num_vertices: int,
    edges: Iterable[tuple[int, int]],
    vertex_labels: FloatArray | None = None,
) -> Graph:
    pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= num_vertices):
        raise ContractError(f"edge endpoints must lie in 0..{num_vertices - 1}")
    labels = vertex_labels if vertex_labels is not None else constant_labels(num_vertices)
    return Graph(
        num_vertices=num_vertices,
        adjacency=symmetric_adjacency(num_vertices, pairs[:, 0], pairs[:, 1]),
        vertex_labels=np.asarray(labels, dtype=np.float64),
    )


def from_networkx(graph: nx.Graph, vertex_labels: FloatArray | None = None) -> Graph:
    relabeled = nx.convert_node_labels_to_integers(graph, ordering="sorted")
    return graph_from_edges(relabeled.number_of_nodes(), relabeled.edges(), vertex_labels)


def constant_labels(num_vertices: int) -> FloatArray:
    return np.ones((1, num_vertices), dtype=np.float64)


def one_hot_labels(categories: IntArray, num_categories: int) -> FloatArray:
    # negative codes mark unknown categories and stay all-zero columns
    labels = np.zeros((num_categories, len(categories)), dtype=np.float64)
    known = np.flatnonzero(categories >= 0)
    labels[categories[known], known] = 1.0
    return labels


def permute_graph(graph: Graph, permutation: npt.ArrayLike) -> Graph:
    """Relabel vertex v as permutation[v]."""
    perm = np.asarray(permutation, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(graph.num_vertices)):
        raise ContractError("permutation must be a bijection on the vertex set")
    coo = graph.adjacency.tocoo()
    labels = np.empty_like(graph.vertex_labels)
    labels[:, perm] = graph.vertex_labels
    return Graph(
        num_vertices=graph.num_vertices,
        adjacency=symmetric_adjacency(graph.num_vertices, perm[coo.row], perm[coo.col]),
        vertex_labels=labels,
    )


def degree_stats(dataset: Dataset) -> tuple[float, int]:
    if not dataset.graphs:
        raise ContractError("degree_stats needs a non-empty dataset")
    maxima = [int(graph.degrees().max()) for graph in dataset.graphs]
    return float(np.mean(maxima)), max(maxima)


def scaling_degree(dataset: Dataset) -> float:
    # edgeless datasets carry no recurrence; any positive k leaves the embedding unchanged
    return dataset.avg_max_degree if dataset.avg_max_degree > 0 else 1.0


def encode_targets(targets: npt.ArrayLike, num_classes: int) -> TargetMatrix:
    classes = np.asarray(targets, dtype=np.int64)
    if num_classes < 2:
        raise ContractError(f"target encoding needs at least two classes, got {num_classes}")
    if classes.size and (classes.min() < 0 or classes.max() >= num_classes):
        raise ContractError(f"targets must lie in 0..{num_classes - 1}")
    if num_classes == 2:
        return TargetMatrix(values=np.where(classes == 1, 1.0, -1.0).reshape(1, -1))
    values = -np.ones((num_classes, len(classes)), dtype=np.float64)
    values[classes, np.arange(len(classes))] = 1.0
    return TargetMatrix(values=values)


def encode_dataset_targets(dataset: Dataset) -> TargetMatrix:
    return encode_targets(dataset.targets, dataset.num_classes)


def dataset_summary(dataset: Dataset) -> DatasetSummary:
    avg_max_degree, global_max_degree = degree_stats(dataset)
    total = dataset.total_vertices
    return DatasetSummary(
        name=dataset.name,
        num_graphs=len(dataset),
        total_vertices=total,
        avg_vertices=total / len(dataset),
        num_classes=dataset.num_classes,
        label_dim=dataset.label_dim,
        avg_max_degree=avg_max_degree,
        global_max_degree=global_max_degree,
    )


def build_dataset(
    name: str,
    graphs: list[Graph],
    targets: npt.ArrayLike,
    num_classes: int | None = None,
) -> Dataset:
    classes = np.asarray(targets, dtype=np.int64)
    resolved_classes = num_classes if num_classes is not None else int(classes.max()) + 1
    label_dim = graphs[0].label_dim if graphs else 1
    partial = Dataset(
        name=name,
        graphs=tuple(graphs),
        targets=classes,
        num_classes=resolved_classes,
        label_dim=label_dim,
        avg_max_degree=0.0,
        class_values=tuple(range(resolved_classes)),
    )
    if not graphs:
        return partial
    avg_max_degree, _ = degree_stats(partial)
    return Dataset(
        name=name,
        graphs=partial.graphs,
        targets=classes,
        num_classes=resolved_classes,
        label_dim=label_dim,
        avg_max_degree=avg_max_degree,
        class_values=partial.class_values,
    )
