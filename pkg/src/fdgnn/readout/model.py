from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
import numpy.typing as npt

from fdgnn.data.graphs import encode_targets, scaling_degree
from fdgnn.embedding.engine import embed_dataset, embed_graph
from fdgnn.readout.ridge import fit_ridge, with_bias_row
from fdgnn.reservoir.weights import build_stack, projection_seed
from fdgnn.state.models import (
    ContractError,
    Dataset,
    EmbeddingConfig,
    FloatArray,
    Graph,
    IntArray,
    LayerWeights,
    ModelConfig,
    TrainedModel,
)


def make_projection(
    hidden_size: int,
    projection_dim: int,
    rng: np.random.Generator,
) -> FloatArray:
    if hidden_size < 1 or projection_dim < 1:
        raise ContractError(
            f"projection needs positive sizes, got P={projection_dim} H={hidden_size}"
        )
    w_phi = rng.uniform(-1.0, 1.0, size=(projection_dim, hidden_size))
    return w_phi / np.linalg.norm(w_phi, axis=1, keepdims=True)


def pool_and_project(states: FloatArray, w_phi: FloatArray) -> FloatArray:
    if states.ndim != 2 or w_phi.shape[1] != states.shape[0]:
        raise ContractError(
            f"projection expects {w_phi.shape[1]}-dimensional states, got {states.shape}"
        )
    return np.tanh(w_phi @ states.sum(axis=1))


def init_network(
    model_cfg: ModelConfig,
    label_dim: int,
    degree: float,
    logger: logging.Logger | None = None,
) -> tuple[tuple[LayerWeights, ...], FloatArray]:
    stack = build_stack(model_cfg, label_dim, degree, logger=logger)
    rng = np.random.default_rng(projection_seed(model_cfg.seed))
    w_phi = make_projection(model_cfg.hidden_size, model_cfg.resolved_projection_dim, rng)
    return stack, w_phi


def extract_features(
    stack: Sequence[LayerWeights],
    w_phi: FloatArray,
    graphs: Sequence[Graph],
    cfg: EmbeddingConfig,
    threads: int = 1,
    logger: logging.Logger | None = None,
    debug: bool = False,
) -> FloatArray:
    results = embed_dataset(stack, graphs, cfg, threads=threads, logger=logger, debug=debug)
    features = np.empty((w_phi.shape[0], len(graphs)), dtype=np.float64)
    for column, result in enumerate(results):
        features[:, column] = pool_and_project(result.states, w_phi)
    return features


def fit_model(
    dataset: Dataset,
    indices: npt.ArrayLike,
    model_cfg: ModelConfig,
    degree: float | None = None,
    threads: int = 1,
    regularize_bias: bool = True,
    logger: logging.Logger | None = None,
    debug: bool = False,
) -> TrainedModel:
    picked = np.asarray(indices, dtype=np.int64)
    if picked.size == 0:
        raise ContractError("fit_model needs at least one training graph")
    k = scaling_degree(dataset) if degree is None else degree
    stack, w_phi = init_network(model_cfg, dataset.label_dim, k, logger=logger)
    embed_cfg = model_cfg.embedding_config()
    train = dataset.subset(picked)
    features = extract_features(
        stack, w_phi, train.graphs, embed_cfg, threads=threads, logger=logger, debug=debug
    )
    w_out = fit_ridge(
        features,
        encode_targets(train.targets, dataset.num_classes),
        model_cfg.ridge_lambda,
        regularize_bias=regularize_bias,
    )
    return TrainedModel(
        stack=stack,
        w_phi=w_phi,
        w_out=w_out,
        embed_cfg=embed_cfg,
        config=model_cfg,
        num_classes=dataset.num_classes,
        degree=k,
        label_dim=dataset.label_dim,
        node_categories=dataset.node_categories,
    )


def outputs_for(w_out: FloatArray, features: FloatArray) -> FloatArray:
    return np.asarray(w_out @ with_bias_row(features))


def classes_from_outputs(outputs: FloatArray) -> IntArray:
    # binary: sign with 0 -> class 1; multi-class: argmax keeps the lowest index on ties
    if outputs.shape[0] == 1:
        return np.where(outputs[0] >= 0.0, 1, 0).astype(np.int64)
    return np.argmax(outputs, axis=0).astype(np.int64)


def decision_values(
    model: TrainedModel,
    graphs: Sequence[Graph],
    threads: int = 1,
    logger: logging.Logger | None = None,
    debug: bool = False,
) -> FloatArray:
    for graph in graphs:
        if graph.label_dim != model.label_dim:
            raise ContractError(
                f"model expects {model.label_dim}-dimensional vertex labels, "
                f"graph has {graph.label_dim}"
            )
    features = extract_features(
        model.stack, model.w_phi, graphs, model.embed_cfg, threads=threads, logger=logger, debug=debug
    )
    return outputs_for(model.w_out, features)


def predict(model: TrainedModel, graph: Graph) -> int:
    states = embed_graph(model.stack, graph, model.embed_cfg).states
    features = pool_and_project(states, model.w_phi).reshape(-1, 1)
    return int(classes_from_outputs(outputs_for(model.w_out, features))[0])


def predict_many(
    model: TrainedModel,
    graphs: Sequence[Graph],
    threads: int = 1,
    logger: logging.Logger | None = None,
    debug: bool = False,
) -> IntArray:
    return classes_from_outputs(
        decision_values(model, graphs, threads=threads, logger=logger, debug=debug)
    )


def accuracy(predicted: npt.ArrayLike, actual: npt.ArrayLike) -> float:
    left = np.asarray(predicted)
    right = np.asarray(actual)
    if left.shape != right.shape or left.size == 0:
        raise ContractError(
            f"accuracy needs two equal non-empty label vectors, got {left.shape} and {right.shape}"
        )
    return float(np.mean(left == right))
