from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np
import pytest

from conftest import TUWriter, write_tudataset_files
from fdgnn.data.tudataset import (
    MalformedDatasetError,
    MissingDatasetFileError,
    dataset_checksum,
    parse_tudataset,
)


def test_triangle_without_node_labels(tudataset_writer: TUWriter) -> None:
    root = tudataset_writer("TRI", [(3, [(0, 1), (1, 2), (2, 0)], 5)])

    dataset = parse_tudataset(root, "TRI")

    assert len(dataset) == 1
    graph = dataset.graphs[0]
    assert graph.num_vertices == 3
    assert graph.adjacency.nnz == 6
    assert np.array_equal(graph.vertex_labels, np.ones((1, 3)))
    assert dataset.label_dim == 1


def test_single_direction_edges_are_symmetrized(tmp_path: Path) -> None:
    directory = tmp_path / "HALF"
    directory.mkdir()
    (directory / "HALF_graph_indicator.txt").write_text("1\n1\n1\n")
    (directory / "HALF_A.txt").write_text("1, 2\n2,3\n2, 3\n")
    (directory / "HALF_graph_labels.txt").write_text("1\n")

    graph = parse_tudataset(tmp_path, "HALF").graphs[0]

    dense = graph.adjacency.toarray()
    assert np.array_equal(dense, dense.T)
    assert graph.edge_set() == {(0, 1), (1, 2)}
    assert np.all(graph.adjacency.data == 1.0)


def test_class_labels_remapped_in_ascending_order(tudataset_writer: TUWriter) -> None:
    root = tudataset_writer(
        "REMAP",
        [(1, [], 7), (1, [], -1), (1, [], 3), (1, [], 7)],
    )

    dataset = parse_tudataset(root, "REMAP")

    assert dataset.num_classes == 3
    assert dataset.class_values == (-1, 3, 7)
    assert dataset.targets.tolist() == [2, 0, 1, 2]


def test_node_labels_one_hot(tudataset_writer: TUWriter) -> None:
    root = tudataset_writer(
        "LAB",
        [(2, [(0, 1)], 0), (3, [(0, 1), (1, 2)], 1)],
        node_labels=[4, 2, 2, 9, 4],
    )

    dataset = parse_tudataset(root, "LAB")

    assert dataset.label_dim == 3
    for graph in dataset.graphs:
        assert np.all(graph.vertex_labels.sum(axis=0) == 1.0)
        assert np.all(np.count_nonzero(graph.vertex_labels, axis=0) == 1)
    # categories sorted: 2 -> row 0, 4 -> row 1, 9 -> row 2
    assert dataset.graphs[0].vertex_labels[:, 0].tolist() == [0.0, 1.0, 0.0]
    assert dataset.graphs[1].vertex_labels[:, 1].tolist() == [0.0, 0.0, 1.0]


def test_missing_required_file_names_the_file(tmp_path: Path) -> None:
    directory = tmp_path / "GONE"
    directory.mkdir()
    (directory / "GONE_graph_indicator.txt").write_text("1\n")
    (directory / "GONE_graph_labels.txt").write_text("0\n")

    with pytest.raises(MissingDatasetFileError, match="GONE_A.txt"):
        parse_tudataset(tmp_path, "GONE")


def test_missing_root_directory(tmp_path: Path) -> None:
    with pytest.raises(MissingDatasetFileError, match="nowhere"):
        parse_tudataset(tmp_path / "nowhere", "X")


def test_graph_labels_optional_for_prediction(tudataset_writer: TUWriter) -> None:
    root = tudataset_writer("NOLAB", [(2, [(0, 1)], 0), (1, [], 0)], with_graph_labels=False)

    dataset = parse_tudataset(root, "NOLAB", require_labels=False)

    assert len(dataset) == 2
    assert dataset.targets.tolist() == [0, 0]
    with pytest.raises(MissingDatasetFileError):
        parse_tudataset(root, "NOLAB")


def test_edge_across_graphs_is_malformed(tmp_path: Path) -> None:
    directory = tmp_path / "CROSS"
    directory.mkdir()
    (directory / "CROSS_graph_indicator.txt").write_text("1\n1\n2\n2\n")
    (directory / "CROSS_A.txt").write_text("1, 2\n2, 3\n")
    (directory / "CROSS_graph_labels.txt").write_text("0\n1\n")

    with pytest.raises(MalformedDatasetError, match="joins graphs 1 and 2"):
        parse_tudataset(tmp_path, "CROSS")


def test_vertex_out_of_range_is_malformed(tmp_path: Path) -> None:
    directory = tmp_path / "RANGE"
    directory.mkdir()
    (directory / "RANGE_graph_indicator.txt").write_text("1\n1\n")
    (directory / "RANGE_A.txt").write_text("1, 5\n")
    (directory / "RANGE_graph_labels.txt").write_text("0\n")

    with pytest.raises(MalformedDatasetError, match="outside 1..2"):
        parse_tudataset(tmp_path, "RANGE")


def test_non_integer_row_reports_line(tmp_path: Path) -> None:
    directory = tmp_path / "BAD"
    directory.mkdir()
    (directory / "BAD_graph_indicator.txt").write_text("1\n1\n")
    (directory / "BAD_A.txt").write_text("1, 2\n2, x\n")
    (directory / "BAD_graph_labels.txt").write_text("0\n")

    with pytest.raises(MalformedDatasetError, match="BAD_A.txt:2"):
        parse_tudataset(tmp_path, "BAD")


def test_self_loops_dropped_with_warning(tmp_path: Path, caplog: pytest.LogCaptureFixture) -> None:
    directory = tmp_path / "LOOP"
    directory.mkdir()
    (directory / "LOOP_graph_indicator.txt").write_text("1\n1\n")
    (directory / "LOOP_A.txt").write_text("1, 1\n1, 2\n2, 1\n")
    (directory / "LOOP_graph_labels.txt").write_text("0\n")

    with caplog.at_level(logging.WARNING, logger="fdgnn"):
        graph = parse_tudataset(tmp_path, "LOOP").graphs[0]

    assert graph.adjacency.diagonal().sum() == 0
    assert graph.num_edges == 1
    assert any(record.message == "self_loops_dropped" for record in caplog.records)


def test_files_directly_under_root(tmp_path: Path) -> None:
    write_tudataset_files(tmp_path, "FLAT", [(2, [(0, 1)], 0)])
    flat_root = tmp_path / "FLAT"

    dataset = parse_tudataset(flat_root, "FLAT")

    assert dataset.total_vertices == 2


def test_round_trip_edge_set(tudataset_writer: TUWriter) -> None:
    rng = np.random.default_rng(3)
    specs = []
    expected = []
    for _ in range(5):
        size = int(rng.integers(3, 9))
        pairs = {
            (int(min(u, v)), int(max(u, v)))
            for u, v in rng.integers(0, size, size=(size * 2, 2))
            if u != v
        }
        specs.append((size, sorted(pairs), 0))
        expected.append(pairs)

    dataset = parse_tudataset(tudataset_writer("RAND", specs), "RAND", require_labels=False)

    assert [graph.edge_set() for graph in dataset.graphs] == expected


def test_checksum_changes_with_content(tudataset_writer: TUWriter) -> None:
    root = tudataset_writer("SUM", [(2, [(0, 1)], 0)])
    first = dataset_checksum(root, "SUM")
    assert first == dataset_checksum(root, "SUM")
    (root / "SUM" / "SUM_graph_labels.txt").write_text("1\n")
    assert dataset_checksum(root, "SUM") != first


def _data_root() -> Path | None:
    raw = os.getenv("FDGNN_DATA_ROOT")
    return Path(raw) if raw else None


@pytest.mark.slow
@pytest.mark.parametrize(
    ("name", "graphs", "vertices", "classes"),
    [("MUTAG", 188, 3371, 2), ("PROTEINS", 1113, 43471, 2)],
)
def test_public_dataset_statistics(name: str, graphs: int, vertices: int, classes: int) -> None:
    root = _data_root()
    if root is None or not (root / name).is_dir():
        pytest.skip(f"{name} not available under FDGNN_DATA_ROOT")

    dataset = parse_tudataset(root, name)

    assert len(dataset) == graphs
    assert dataset.total_vertices == vertices
    assert dataset.num_classes == classes


def test_node_categories_recorded(tudataset_writer: TUWriter) -> None:
    root = tudataset_writer("CATS", [(2, [(0, 1)], 0), (1, [], 1)], node_labels=[7, 3, 7])

    dataset = parse_tudataset(root, "CATS")

    assert dataset.node_categories == (3, 7)
    assert dataset.subset([1]).node_categories == (3, 7)
    assert parse_tudataset(tudataset_writer("PLAIN", [(1, [], 0)]), "PLAIN").node_categories == ()


def test_held_out_directory_encoded_over_training_categories(
    tudataset_writer: TUWriter, caplog: pytest.LogCaptureFixture
) -> None:
    root = tudataset_writer("TR", [(1, [], 0), (1, [], 1)], node_labels=[0, 1])
    tudataset_writer("TE", [(1, [], 0), (1, [], 1)], node_labels=[1, 2])
    training = parse_tudataset(root, "TR")

    with caplog.at_level(logging.WARNING, logger="fdgnn"):
        held_out = parse_tudataset(root, "TE", node_categories=training.node_categories)

    assert held_out.label_dim == training.label_dim == 2
    assert np.array_equal(held_out.graphs[0].vertex_labels, training.graphs[1].vertex_labels)
    assert np.array_equal(held_out.graphs[1].vertex_labels, np.zeros((2, 1)))
    warning = next(r for r in caplog.records if r.message == "unknown_node_labels")
    assert warning.labels == [2]  # type: ignore[attr-defined]
    assert warning.vertices == 1  # type: ignore[attr-defined]


def test_categories_follow_given_column_order(tudataset_writer: TUWriter) -> None:
    root = tudataset_writer("ORD", [(2, [(0, 1)], 0)], node_labels=[5, 9])

    graph = parse_tudataset(root, "ORD", node_categories=(9, 5, 1)).graphs[0]

    assert np.array_equal(graph.vertex_labels, np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]))


def test_given_categories_need_node_labels_file(tudataset_writer: TUWriter) -> None:
    root = tudataset_writer("BARE", [(2, [(0, 1)], 0)])
    with pytest.raises(MissingDatasetFileError, match="node_labels"):
        parse_tudataset(root, "BARE", node_categories=(1, 2))
