from __future__ import annotations

import hashlib
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from fdgnn.data.graphs import degree_stats, one_hot_labels, symmetric_adjacency
from fdgnn.state.models import Dataset, Graph, IntArray

ADJACENCY_SUFFIX = "A"
GRAPH_INDICATOR_SUFFIX = "graph_indicator"
GRAPH_LABELS_SUFFIX = "graph_labels"
NODE_LABELS_SUFFIX = "node_labels"
_CHECKSUM_SUFFIXES = (
    ADJACENCY_SUFFIX,
    GRAPH_INDICATOR_SUFFIX,
    GRAPH_LABELS_SUFFIX,
    NODE_LABELS_SUFFIX,
)


class DatasetError(ValueError):
    pass


class MissingDatasetFileError(DatasetError):
    def __init__(self, path: Path) -> None:
        super().__init__(f"Dataset file not found: {path}")
        self.path = path


class MalformedDatasetError(DatasetError):
    pass


def dataset_dir(root_path: Path, dataset_name: str) -> Path:
    nested = root_path / dataset_name
    if nested.is_dir():
        return nested
    return root_path


def dataset_file(root_path: Path, dataset_name: str, suffix: str) -> Path:
    return dataset_dir(root_path, dataset_name) / f"{dataset_name}_{suffix}.txt"


def parse_tudataset(
    root_path: Path,
    dataset_name: str,
    *,
    require_labels: bool = True,
    node_categories: Sequence[int] | None = None,
    logger: logging.Logger | None = None,
) -> Dataset:
    """Read a TUDataset directory.

    Vertex labels are one-hot encoded over ``node_categories`` when given, in
    that column order, so a held-out directory is encoded like the training
    one; labels outside it become all-zero columns. Otherwise the categories
    are the sorted distinct labels found in the directory, and a directory
    without a node labels file gets the constant vertex label.
    """
    logger = logger or logging.getLogger("fdgnn")
    root_path = Path(root_path)
    if not root_path.is_dir():
        raise MissingDatasetFileError(root_path)

    indicator_path = dataset_file(root_path, dataset_name, GRAPH_INDICATOR_SUFFIX)
    adjacency_path = dataset_file(root_path, dataset_name, ADJACENCY_SUFFIX)
    graph_labels_path = dataset_file(root_path, dataset_name, GRAPH_LABELS_SUFFIX)
    node_labels_path = dataset_file(root_path, dataset_name, NODE_LABELS_SUFFIX)

    indicator = _read_int_column(_require(indicator_path))
    edges = _read_int_rows(_require(adjacency_path), columns=2)
    if indicator.size == 0:
        raise MalformedDatasetError(f"{indicator_path.name} lists no vertices")
    if indicator.min() < 1:
        raise MalformedDatasetError(f"{indicator_path.name}: graph ids must start at 1")
    num_graphs = int(indicator.max())

    if require_labels or graph_labels_path.exists():
        raw_targets = _read_int_column(_require(graph_labels_path))
        if len(raw_targets) != num_graphs:
            raise MalformedDatasetError(
                f"{graph_labels_path.name} has {len(raw_targets)} labels for {num_graphs} graphs"
            )
        class_values, targets = np.unique(raw_targets, return_inverse=True)
    else:
        class_values = np.zeros(0, dtype=np.int64)
        targets = np.zeros(num_graphs, dtype=np.int64)

    num_vertices_total = len(indicator)
    node_codes, categories = _node_codes(
        node_labels_path, num_vertices_total, node_categories, dataset_name, logger
    )
    label_dim = len(categories) if categories else 1

    graph_of_vertex = indicator - 1
    if edges.size and (edges.min() < 1 or edges.max() > num_vertices_total):
        bad = edges[(edges < 1).any(axis=1) | (edges > num_vertices_total).any(axis=1)][0]
        raise MalformedDatasetError(
            f"{adjacency_path.name}: edge ({bad[0]}, {bad[1]}) references a vertex "
            f"outside 1..{num_vertices_total}"
        )
    sources = edges[:, 0] - 1
    targets_v = edges[:, 1] - 1
    crossing = graph_of_vertex[sources] != graph_of_vertex[targets_v]
    if crossing.any():
        first = int(np.flatnonzero(crossing)[0])
        raise MalformedDatasetError(
            f"{adjacency_path.name}: edge ({edges[first, 0]}, {edges[first, 1]}) joins "
            f"graphs {graph_of_vertex[sources[first]] + 1} and "
            f"{graph_of_vertex[targets_v[first]] + 1}"
        )
    self_loops = int(np.count_nonzero(sources == targets_v))
    if self_loops:
        logger.warning("self_loops_dropped", extra={"dataset": dataset_name, "count": self_loops})

    order = np.argsort(graph_of_vertex, kind="stable")
    sizes = np.bincount(graph_of_vertex, minlength=num_graphs)
    if (sizes == 0).any():
        empty = int(np.flatnonzero(sizes == 0)[0]) + 1
        raise MalformedDatasetError(f"{indicator_path.name}: graph {empty} has no vertices")
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    local_index = np.empty(num_vertices_total, dtype=np.int64)
    local_index[order] = np.arange(num_vertices_total) - np.repeat(offsets[:-1], sizes)

    edge_graph = graph_of_vertex[sources]
    edge_order = np.argsort(edge_graph, kind="stable")
    edge_bounds = np.searchsorted(edge_graph[edge_order], np.arange(num_graphs + 1))

    graphs: list[Graph] = []
    for graph_index in range(num_graphs):
        vertices = order[offsets[graph_index] : offsets[graph_index + 1]]
        picked = edge_order[edge_bounds[graph_index] : edge_bounds[graph_index + 1]]
        size = int(sizes[graph_index])
        if node_codes is None:
            labels = np.ones((1, size), dtype=np.float64)
        else:
            labels = one_hot_labels(node_codes[vertices], label_dim)
        graphs.append(
            Graph(
                num_vertices=size,
                adjacency=symmetric_adjacency(
                    size, local_index[sources[picked]], local_index[targets_v[picked]]
                ),
                vertex_labels=labels,
            )
        )

    provisional = Dataset(
        name=dataset_name,
        graphs=tuple(graphs),
        targets=np.asarray(targets, dtype=np.int64),
        num_classes=max(len(class_values), 1),
        label_dim=label_dim,
        avg_max_degree=0.0,
        class_values=tuple(int(value) for value in class_values),
        node_categories=categories,
    )
    avg_max_degree, global_max_degree = degree_stats(provisional)
    dataset = Dataset(
        name=provisional.name,
        graphs=provisional.graphs,
        targets=provisional.targets,
        num_classes=provisional.num_classes,
        label_dim=provisional.label_dim,
        avg_max_degree=avg_max_degree,
        class_values=provisional.class_values,
        node_categories=provisional.node_categories,
    )
    logger.info(
        "dataset_loaded",
        extra={
            "dataset": dataset_name,
            "graphs": len(dataset),
            "vertices": num_vertices_total,
            "classes": dataset.num_classes,
            "label_dim": label_dim,
            "avg_max_degree": round(avg_max_degree, 6),
            "global_max_degree": global_max_degree,
        },
    )
    return dataset


def dataset_checksum(root_path: Path, dataset_name: str) -> str:
    digest = hashlib.sha256()
    for suffix in _CHECKSUM_SUFFIXES:
        path = dataset_file(Path(root_path), dataset_name, suffix)
        if not path.exists():
            continue
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def _require(path: Path) -> Path:
    if not path.is_file():
        raise MissingDatasetFileError(path)
    return path


def _read_int_column(path: Path) -> IntArray:
    return _read_int_rows(path, columns=1)[:, 0]


def _read_int_rows(path: Path, columns: int) -> IntArray:
    try:
        text = path.read_text()
    except OSError as exc:
        raise DatasetError(f"Unable to read dataset file: {path}") from exc
    rows: list[list[int]] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        cleaned = line.strip()
        if not cleaned:
            continue
        parts = [part.strip() for part in cleaned.split(",")]
        if len(parts) != columns:
            raise MalformedDatasetError(
                f"{path.name}:{line_number}: expected {columns} value(s), got {len(parts)}"
            )
        try:
            rows.append([int(part) for part in parts])
        except ValueError as exc:
            raise MalformedDatasetError(
                f"{path.name}:{line_number}: not an integer row: {cleaned!r}"
            ) from exc
    return np.asarray(rows, dtype=np.int64).reshape(-1, columns)


def _node_codes(
    path: Path,
    num_vertices: int,
    node_categories: Sequence[int] | None,
    dataset_name: str,
    logger: logging.Logger,
) -> tuple[IntArray | None, tuple[int, ...]]:
    if not path.exists():
        if not node_categories:
            return None, ()
        raise MissingDatasetFileError(path)
    raw = _read_int_column(path)
    if len(raw) != num_vertices:
        raise MalformedDatasetError(
            f"{path.name} has {len(raw)} labels for {num_vertices} vertices"
        )
    if not node_categories:
        values, codes = np.unique(raw, return_inverse=True)
        return codes.astype(np.int64), tuple(int(value) for value in values)

    known = np.asarray(node_categories, dtype=np.int64)
    if len(np.unique(known)) != len(known):
        raise DatasetError(f"node categories must be distinct, got {tuple(node_categories)}")
    order = np.argsort(known, kind="stable")
    ordered = known[order]
    position = np.minimum(np.searchsorted(ordered, raw), len(ordered) - 1)
    found = ordered[position] == raw
    codes = np.where(found, order[position], -1).astype(np.int64)
    if not found.all():
        logger.warning(
            "unknown_node_labels",
            extra={
                "dataset": dataset_name,
                "vertices": int(np.count_nonzero(~found)),
                "labels": sorted({int(value) for value in raw[~found]}),
            },
        )
    return codes, tuple(int(value) for value in known)
