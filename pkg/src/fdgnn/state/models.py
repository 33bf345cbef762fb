from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import sparse

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]


class ContractError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    num_vertices: int
    adjacency: sparse.csr_matrix
    vertex_labels: FloatArray

    def __post_init__(self) -> None:
        if self.num_vertices < 1:
            raise ContractError(f"graph must have at least one vertex, got {self.num_vertices}")
        if self.adjacency.shape != (self.num_vertices, self.num_vertices):
            raise ContractError(
                f"adjacency shape {self.adjacency.shape} does not match N={self.num_vertices}"
            )
        if self.vertex_labels.ndim != 2 or self.vertex_labels.shape[1] != self.num_vertices:
            raise ContractError(
                f"vertex_labels must be I x N with N={self.num_vertices}, "
                f"got {self.vertex_labels.shape}"
            )
        if self.vertex_labels.shape[0] < 1:
            raise ContractError("vertex_labels must have at least one row")
        if self.adjacency.diagonal().any():
            raise ContractError("adjacency must have a zero diagonal")
        if (self.adjacency != self.adjacency.T).nnz:
            raise ContractError("adjacency must be symmetric")
        if self.adjacency.nnz and not np.all(self.adjacency.data == 1.0):
            raise ContractError("adjacency entries must be 0 or 1")

    @property
    def label_dim(self) -> int:
        return int(self.vertex_labels.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.nnz // 2)

    def degrees(self) -> IntArray:
        return np.asarray(self.adjacency.getnnz(axis=1), dtype=np.int64)

    def neighbors(self, vertex: int) -> IntArray:
        start, stop = self.adjacency.indptr[vertex], self.adjacency.indptr[vertex + 1]
        return np.asarray(self.adjacency.indices[start:stop], dtype=np.int64)

    def edge_set(self) -> set[tuple[int, int]]:
        coo = self.adjacency.tocoo()
        return {
            (int(i), int(j)) for i, j in zip(coo.row, coo.col) if i < j
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    graphs: tuple[Graph, ...]
    targets: IntArray
    num_classes: int
    label_dim: int
    avg_max_degree: float
    class_values: tuple[int, ...] = ()
    node_categories: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(self.graphs) != len(self.targets):
            raise ContractError(
                f"{len(self.graphs)} graphs but {len(self.targets)} targets"
            )
        if len(self.targets) and (self.targets.min() < 0 or self.targets.max() >= self.num_classes):
            raise ContractError(f"targets must lie in 0..{self.num_classes - 1}")
        for graph in self.graphs:
            if graph.label_dim != self.label_dim:
                raise ContractError(
                    f"graph label_dim {graph.label_dim} differs from dataset label_dim {self.label_dim}"
                )
        if self.node_categories and len(self.node_categories) != self.label_dim:
            raise ContractError(
                f"{len(self.node_categories)} node categories for label_dim {self.label_dim}"
            )

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def total_vertices(self) -> int:
        return sum(graph.num_vertices for graph in self.graphs)

    def subset(self, indices: npt.ArrayLike) -> Dataset:
        picked = np.asarray(indices, dtype=np.int64)
        return Dataset(
            name=self.name,
            graphs=tuple(self.graphs[int(index)] for index in picked),
            targets=self.targets[picked],
            num_classes=self.num_classes,
            label_dim=self.label_dim,
            avg_max_degree=self.avg_max_degree,
            class_values=self.class_values,
            node_categories=self.node_categories,
        )


@dataclass(frozen=True, eq=False)
class TargetMatrix:
    values: FloatArray

    @property
    def num_outputs(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_samples(self) -> int:
        return int(self.values.shape[1])

    def columns(self, indices: npt.ArrayLike) -> TargetMatrix:
        return TargetMatrix(values=self.values[:, np.asarray(indices, dtype=np.int64)])


@dataclass(frozen=True, eq=False)
class LayerWeights:
    w_input: sparse.csr_matrix
    w_recurrent: sparse.csr_matrix

    @property
    def hidden_size(self) -> int:
        return int(self.w_recurrent.shape[0])

    @property
    def input_size(self) -> int:
        return int(self.w_input.shape[1])


@dataclass(frozen=True)
class EmbeddingConfig:
    epsilon: float = 1e-3
    max_iters: int = 50

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ContractError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iters < 1:
            raise ContractError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True, eq=False)
class EmbeddingResult:
    states: FloatArray
    per_layer_iterations: tuple[int, ...]
    converged_flags: tuple[bool, ...]
    residuals: tuple[float, ...] = ()

    @property
    def converged(self) -> bool:
        return all(self.converged_flags)


@dataclass(frozen=True)
class ReadoutConfig:
    projection_dim: int
    ridge_lambda: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.projection_dim < 1:
            raise ContractError(f"projection_dim must be >= 1, got {self.projection_dim}")
        if self.ridge_lambda < 0:
            raise ContractError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 1
    hidden_size: int = 50
    connections: int = 1
    rho: float = 0.9
    omega1: float = 0.5
    omega: float = 0.5
    epsilon: float = 1e-3
    max_iters: int = 50
    projection_dim: int | None = None
    ridge_lambda: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_layers < 1:
            raise ContractError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.hidden_size < 1:
            raise ContractError(f"hidden_size must be >= 1, got {self.hidden_size}")
        if not 1 <= self.connections <= self.hidden_size:
            raise ContractError(
                f"connections must lie in 1..hidden_size, got {self.connections}"
            )
        for name in ("rho", "omega1", "omega"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ContractError(f"{name} must lie in (0, 1), got {value}")
        if self.projection_dim is not None and self.projection_dim < 1:
            raise ContractError(f"projection_dim must be >= 1, got {self.projection_dim}")
        if self.ridge_lambda < 0:
            raise ContractError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if self.seed < 0:
            raise ContractError(f"seed must be non-negative, got {self.seed}")
        EmbeddingConfig(epsilon=self.epsilon, max_iters=self.max_iters)

    @property
    def resolved_projection_dim(self) -> int:
        return self.projection_dim if self.projection_dim is not None else 2 * self.hidden_size

    def embedding_config(self) -> EmbeddingConfig:
        return EmbeddingConfig(epsilon=self.epsilon, max_iters=self.max_iters)

    def readout_config(self, seed: int) -> ReadoutConfig:
        return ReadoutConfig(
            projection_dim=self.resolved_projection_dim,
            ridge_lambda=self.ridge_lambda,
            seed=seed,
        )


@dataclass(frozen=True, eq=False)
class TrainedModel:
    stack: tuple[LayerWeights, ...]
    w_phi: FloatArray
    w_out: FloatArray
    embed_cfg: EmbeddingConfig
    config: ModelConfig
    num_classes: int
    degree: float
    label_dim: int
    node_categories: tuple[int, ...] = ()

    @property
    def binary(self) -> bool:
        return int(self.w_out.shape[0]) == 1


@dataclass(frozen=True)
class FoldResult:
    fold: int
    config: ModelConfig
    inner_score: float
    test_accuracy: float
    train_seconds: float
    test_seconds: float


@dataclass(frozen=True)
class CVReport:
    per_fold: tuple[FoldResult, ...]
    mean_accuracy: float
    std_accuracy: float
    mean_depth: float
    std_depth: float = 0.0
    mean_train_seconds: float = 0.0
    std_train_seconds: float = 0.0
    mean_test_seconds: float = 0.0
    std_test_seconds: float = 0.0

    @classmethod
    def from_folds(cls, folds: list[FoldResult]) -> CVReport:
        if not folds:
            raise ContractError("a CV report needs at least one fold")
        accuracies = np.array([fold.test_accuracy for fold in folds], dtype=np.float64)
        depths = np.array([fold.config.num_layers for fold in folds], dtype=np.float64)
        train = np.array([fold.train_seconds for fold in folds], dtype=np.float64)
        test = np.array([fold.test_seconds for fold in folds], dtype=np.float64)
        return cls(
            per_fold=tuple(folds),
            mean_accuracy=float(accuracies.mean()),
            std_accuracy=float(accuracies.std()),
            mean_depth=float(depths.mean()),
            std_depth=float(depths.std()),
            mean_train_seconds=float(train.mean()),
            std_train_seconds=float(train.std()),
            mean_test_seconds=float(test.mean()),
            std_test_seconds=float(test.std()),
        )
