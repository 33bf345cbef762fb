from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, Sequence

import networkx as nx
import pytest

from fdgnn.data.graphs import build_dataset, from_networkx
from fdgnn.state.models import Dataset

GraphSpec = tuple[int, Sequence[tuple[int, int]], int]
TUWriter = Callable[..., Path]


def write_tudataset_files(
    root: Path,
    name: str,
    graphs: Sequence[GraphSpec],
    node_labels: Sequence[int] | None = None,
    with_graph_labels: bool = True,
) -> Path:
    """Write ``graphs`` (vertex count, 0-based local edges, class) in TUDataset layout."""
    directory = root / name
    directory.mkdir(parents=True, exist_ok=True)
    indicator: list[str] = []
    edges: list[str] = []
    labels: list[str] = []
    offset = 0
    for graph_id, (num_vertices, local_edges, target) in enumerate(graphs, start=1):
        indicator.extend(str(graph_id) for _ in range(num_vertices))
        for u, v in local_edges:
            edges.append(f"{u + offset + 1}, {v + offset + 1}")
            edges.append(f"{v + offset + 1}, {u + offset + 1}")
        labels.append(str(target))
        offset += num_vertices
    (directory / f"{name}_graph_indicator.txt").write_text("\n".join(indicator) + "\n")
    (directory / f"{name}_A.txt").write_text("\n".join(edges) + ("\n" if edges else ""))
    if with_graph_labels:
        (directory / f"{name}_graph_labels.txt").write_text("\n".join(labels) + "\n")
    if node_labels is not None:
        (directory / f"{name}_node_labels.txt").write_text(
            "\n".join(str(label) for label in node_labels) + "\n"
        )
    return directory


def toy_graph_specs(per_class: int = 12) -> list[GraphSpec]:
    """Cycles (class 0) against stars (class 1) of sizes 4..8."""
    specs: list[GraphSpec] = []
    for index in range(per_class):
        size = 4 + index % 5
        specs.append((size, [(v, (v + 1) % size) for v in range(size)], 0))
        specs.append((size, [(0, v) for v in range(1, size)], 1))
    return specs


def toy_dataset(per_class: int = 12) -> Dataset:
    graphs = []
    targets = []
    for size, edges, target in toy_graph_specs(per_class):
        graph = nx.Graph()
        graph.add_nodes_from(range(size))
        graph.add_edges_from(edges)
        graphs.append(from_networkx(graph))
        targets.append(target)
    return build_dataset("TOY", graphs, targets, num_classes=2)


@pytest.fixture
def tudataset_writer(tmp_path: Path) -> TUWriter:
    def write(name: str, graphs: Sequence[GraphSpec], **kwargs: object) -> Path:
        write_tudataset_files(tmp_path, name, graphs, **kwargs)  # type: ignore[arg-type]
        return tmp_path

    return write


@pytest.fixture
def fdgnn_logger() -> logging.Logger:
    logger = logging.getLogger("fdgnn")
    logger.setLevel(logging.DEBUG)
    return logger
